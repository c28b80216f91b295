#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flowlut/optim.hpp"
#include "flowlut/pipeline.hpp"

namespace flowlut {

// Binary layout, all integers and floats little-endian:
//
//   "FLUT"  u8 version (= 1)
//   then five sections, each  tag[4]  u64 payload_length  payload:
//     CONF  u32 n, then n x (u32 len, key bytes, u32 len, value bytes)
//     LUTS  u32 n, then n x (u32 len, name bytes, u32 D, u8 trainable, f32[D^3*3])
//     WGEN  tensor list
//     FNET  tensor list
//     OPTM  u64 step, u32 n, then n x (tensor m, tensor v)
//   tensor list: u32 n, then n tensors;  tensor: u32 rank, u64 dims[rank], f32 data

inline constexpr char kCheckpointMagic[4] = {'F', 'L', 'U', 'T'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  FlowLutModel model;
  OptimizerState optimizer;
};

std::vector<std::uint8_t> serialize_checkpoint(const FlowLutModel& model,
                                               const OptimizerState& state);
/// Throws LoadError naming the section being read.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const FlowLutModel& model, const OptimizerState& state,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace flowlut
