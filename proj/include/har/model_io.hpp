#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "har/model.hpp"

namespace har {

// Binary model container, all integers and doubles little-endian:
//
//   "HARMODEL"                       8-byte magic
//   u32 format version               kModelFormatVersion
//   config block                     arch u8, input_time u32, input_channels u32,
//                                    conv_depth u32, filters u32, kernel_time u32,
//                                    pool_time u32, dropout f64, learning_rate f64,
//                                    epochs u32, batch_size u32, lstm_hidden u32
//                                    (0 = none), seed u64
//   column subset                    u32 count, u32 each
//   input stats                      u8 present, then u32 width, f64 means, f64 stddevs
//   history                          u32 epochs, (f64 loss, f64 accuracy) each
//   tensors                          u32 count; per tensor: u32 name length, name
//                                    bytes, u32 rank, u32 dims, f64 payload
//   u32 CRC-32 of all preceding bytes
inline constexpr std::uint32_t kModelFormatVersion = 1;

class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace har
