#ifndef JLGCN_CHECKPOINT_HPP
#define JLGCN_CHECKPOINT_HPP

#include "jlgcn/matrix.hpp"
#include "jlgcn/optim.hpp"

#include <concepts>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace jlgcn {

struct NamedTensor {
    std::string name;
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    std::vector<double> values;  ///< row-major; exact for both element types

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Model state plus what is needed to reproduce it.
///
/// File layout, all integers little-endian:
///
///   magic      8 bytes  "JLGCNCK1"
///   version    u32      (currently 1)
///   dtype      u32      4 = float32, 8 = float64 element storage
///   rng seed   u64
///   rng pos    u64      raw draws consumed
///   config     u64 length + UTF-8 JSON text
///   count      u64      number of tensors
///   tensor     u32 name length, name, u64 rows, u64 cols, rows*cols IEEE-754 values
///   checksum   u64      FNV-1a over every preceding byte
///
/// Values are written bit-exactly, so a file produced on one platform
/// restores identical parameters on any IEEE-754 little- or big-endian host.
struct Checkpoint {
    static constexpr std::string_view magic = "JLGCNCK1";
    static constexpr std::uint32_t version = 1;

    std::uint32_t dtype = 8;
    std::uint64_t rng_seed = 0;
    std::uint64_t rng_position = 0;
    std::string config_json;
    std::vector<NamedTensor> tensors;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;

    /// Throws CheckpointError when no tensor has this name.
    const NamedTensor& find(std::string_view name) const;
};

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint);
/// Throws CheckpointError on bad magic, version, dtype, truncation,
/// trailing bytes, or checksum mismatch.
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Appends copies of the referenced matrices.
template <std::floating_point T>
void capture(Checkpoint& checkpoint, std::span<const ParamRef<T>> params);

/// Copies stored tensors into the referenced matrices by name. Throws
/// CheckpointError when a tensor is missing or its shape differs.
template <std::floating_point T>
void restore(const Checkpoint& checkpoint, std::span<const ParamRef<T>> params);

} // namespace jlgcn

#endif // JLGCN_CHECKPOINT_HPP
