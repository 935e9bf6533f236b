#pragma once

#include <filesystem>
#include <string>

#include "hashlab/trainer.hpp"

namespace hashlab {

/// Versioned binary checkpoint.
///
///   "HLCK", u32 version, u32 scalar width in bytes, u32 layer count
///   per layer: weight rank + u32 extents, bias rank + u32 extents, then the raw
///              little-endian values of weight, bias, weight momentum, bias momentum
///   trainer block: "TRST", i64 iteration, f64 epsilon, f64 last loss, u32 sharing mode,
///              u32 sub-network count, u32 head variant, u64 q, u64 head input length,
///              f64 beta, u8 apply-threshold, string network spec, string notes
///   "END!"
///
/// Layers are the sub-network layers in order (P then Q in query-independent mode)
/// followed by the hash head. Strings are u32 length + bytes.
template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const TrainState<Scalar>& state,
                     const std::string& notes = {});

/// Throws IoError, or FormatError on a bad magic, version mismatch or truncation; nothing
/// is returned unless the whole file parsed. Values stored at another precision are
/// converted.
template <typename Scalar>
TrainState<Scalar> load_checkpoint(const std::filesystem::path& path, std::string* notes = nullptr);

/// Scalar width (4 or 8) recorded in a checkpoint header.
int checkpoint_scalar_bytes(const std::filesystem::path& path);

}  // namespace hashlab
