#include "har/activity.hpp"

#include <stdexcept>
#include <string>

namespace har {

namespace {

constexpr std::array<std::string_view, kActivityCount> kActivityNames = {
    "Walking", "Upstairs", "Downstairs", "Sitting", "Standing", "Lying",
};

constexpr std::array<std::string_view, kChannelCount> kChannelNames = {
    "BodyAccX", "BodyAccY", "BodyAccZ", "GyroX", "GyroY",
    "GyroZ",    "TotalAccX", "TotalAccY", "TotalAccZ",
};

constexpr std::array<std::string_view, kChannelCount> kChannelStems = {
    "body_acc_x",  "body_acc_y",  "body_acc_z",  "body_gyro_x", "body_gyro_y",
    "body_gyro_z", "total_acc_x", "total_acc_y", "total_acc_z",
};

}  // namespace

ActivityLabel activity_from_index(std::size_t index) {
    if (index >= kActivityCount) {
        throw std::out_of_range("activity index " + std::to_string(index) + " outside 0..5");
    }
    return kAllActivities[index];
}

ActivityLabel activity_from_raw_label(int raw) {
    if (raw < 1 || raw > static_cast<int>(kActivityCount)) {
        throw std::out_of_range("activity label " + std::to_string(raw) + " outside 1..6");
    }
    return kAllActivities[static_cast<std::size_t>(raw - 1)];
}

int raw_label(ActivityLabel a) { return static_cast<int>(index_of(a)) + 1; }

std::string_view activity_name(ActivityLabel a) { return kActivityNames.at(index_of(a)); }

std::optional<ActivityLabel> activity_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kActivityCount; ++i) {
        if (kActivityNames[i] == name) return kAllActivities[i];
    }
    return std::nullopt;
}

Channel channel_from_index(std::size_t index) {
    if (index >= kChannelCount) {
        throw std::out_of_range("channel index " + std::to_string(index) + " outside 0..8");
    }
    return static_cast<Channel>(index);
}

std::string_view channel_name(Channel c) { return kChannelNames.at(index_of(c)); }

std::string_view channel_file_stem(Channel c) { return kChannelStems.at(index_of(c)); }

}  // namespace har
