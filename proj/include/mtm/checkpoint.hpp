#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtm/autodiff.hpp"

namespace mtm {

/// Named-tensor archive:
///   magic "MTMCKPT\0", u32 version, u64 header length, JSON header,
///   u64 tensor count, then per tensor: u32 name length, name, u32 rank,
///   u64 dims[rank], f64 values. All integers and floats little-endian.
struct NamedTensor {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
};

struct Archive {
  static constexpr std::uint32_t kVersion = 1;
  nlohmann::json header;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

template <typename T>
std::vector<NamedTensor> tensors_from_store(const ad::ParamStore<T>& store);

/// Copies archive tensors into an existing store; throws ad::ShapeError on a
/// missing name or shape mismatch.
template <typename T>
void load_into_store(const Archive& archive, ad::ParamStore<T>& store);

}  // namespace mtm
