#pragma once

#include <filesystem>

#include "deephash/network.hpp"

namespace deephash {

/// Binary checkpoint container (little-endian):
///
///   "DHCKPT\0\0" | u32 version=1
///   | string net config text (u64 length + bytes)
///   | u8 hash-head state
///   | u32 feature-layer count, then per layer: u32 block count, tensors
///   | u32 classifier block count, tensors
///   | tensor hash head (rank 0 when absent)
///   | u32 CRC-32 of all preceding bytes
///
/// A tensor is u32 rank, u64 extents, then IEEE-754 doubles. The embedded
/// config makes a checkpoint self-describing; loading rebuilds the network
/// and validates every block shape against it.
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace deephash
