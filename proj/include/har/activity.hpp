#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace har {

// Listing order of the UCI HAR label file (raw labels 1..6).
enum class ActivityLabel : std::uint8_t {
    Walking = 0,
    Upstairs,
    Downstairs,
    Sitting,
    Standing,
    Lying,
};

inline constexpr std::size_t kActivityCount = 6;

inline constexpr std::array<ActivityLabel, kActivityCount> kAllActivities = {
    ActivityLabel::Walking, ActivityLabel::Upstairs, ActivityLabel::Downstairs,
    ActivityLabel::Sitting, ActivityLabel::Standing, ActivityLabel::Lying,
};

constexpr std::size_t index_of(ActivityLabel a) { return static_cast<std::size_t>(a); }

ActivityLabel activity_from_index(std::size_t index);

// Raw label file encoding: Walking=1 ... Lying=6. Throws std::out_of_range.
ActivityLabel activity_from_raw_label(int raw);
int raw_label(ActivityLabel a);

std::string_view activity_name(ActivityLabel a);
std::optional<ActivityLabel> activity_from_name(std::string_view name);

// Column semantics of a window: body acceleration (g), gyroscope (rad/s),
// total acceleration including gravity (g).
enum class Channel : std::uint8_t {
    BodyAccX = 0,
    BodyAccY,
    BodyAccZ,
    GyroX,
    GyroY,
    GyroZ,
    TotalAccX,
    TotalAccY,
    TotalAccZ,
};

inline constexpr std::size_t kChannelCount = 9;

constexpr std::size_t index_of(Channel c) { return static_cast<std::size_t>(c); }

Channel channel_from_index(std::size_t index);
std::string_view channel_name(Channel c);

// File stem used in the "Inertial Signals" directory, e.g. "body_gyro_x".
std::string_view channel_file_stem(Channel c);

constexpr bool is_gyroscope(Channel c) {
    return c == Channel::GyroX || c == Channel::GyroY || c == Channel::GyroZ;
}

}  // namespace har
