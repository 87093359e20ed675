#include "mtm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mtm {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'M', 'C', 'K', 'P', 'T', '\0'};

template <typename U>
void put(std::ostream& out, U value) {
  static_assert(std::is_integral_v<U>);
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw std::runtime_error("truncated checkpoint");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

std::string get_string(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw std::runtime_error("truncated checkpoint");
  return s;
}

}  // namespace

const NamedTensor* Archive::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, Archive::kVersion);
    const std::string header = archive.header.dump();
    put<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    put<std::uint64_t>(out, archive.tensors.size());
    for (const auto& t : archive.tensors) {
      if (t.values.size() != ad::numel(t.shape)) throw ad::ShapeError("tensor " + t.name + " does not match its shape");
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
      out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
      for (std::size_t d : t.shape) put<std::uint64_t>(out, d);
      for (double v : t.values) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  // Readers never observe a half-written checkpoint.
  std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error(path.string() + " is not a checkpoint archive");
  const auto version = get<std::uint32_t>(in);
  if (version != Archive::kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Archive archive;
  archive.header = nlohmann::json::parse(get_string(in, get<std::uint64_t>(in)));
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = get_string(in, get<std::uint32_t>(in));
    const auto rank = get<std::uint32_t>(in);
    for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(get<std::uint64_t>(in));
    t.values.resize(ad::numel(t.shape));
    for (double& v : t.values) v = std::bit_cast<double>(get<std::uint64_t>(in));
    archive.tensors.push_back(std::move(t));
  }
  return archive;
}

template <typename T>
std::vector<NamedTensor> tensors_from_store(const ad::ParamStore<T>& store) {
  std::vector<NamedTensor> out;
  for (const auto& p : store.params())
    out.push_back({p.name, p.value.shape, std::vector<double>(p.value.data.begin(), p.value.data.end())});
  return out;
}

template <typename T>
void load_into_store(const Archive& archive, ad::ParamStore<T>& store) {
  if (archive.tensors.size() != store.params().size())
    throw ad::ShapeError("checkpoint holds " + std::to_string(archive.tensors.size()) + " tensors, model expects " +
                         std::to_string(store.params().size()));
  for (auto& p : store.params()) {
    const NamedTensor* t = archive.find(p.name);
    if (!t) throw ad::ShapeError("checkpoint is missing tensor " + p.name);
    if (t->shape != p.value.shape)
      throw ad::ShapeError("tensor " + p.name + ": checkpoint shape " + ad::shape_string(t->shape) +
                           " vs model shape " + ad::shape_string(p.value.shape));
    for (std::size_t i = 0; i < t->values.size(); ++i) p.value.data[i] = static_cast<T>(t->values[i]);
  }
}

template std::vector<NamedTensor> tensors_from_store<float>(const ad::ParamStore<float>&);
template std::vector<NamedTensor> tensors_from_store<double>(const ad::ParamStore<double>&);
template void load_into_store<float>(const Archive&, ad::ParamStore<float>&);
template void load_into_store<double>(const Archive&, ad::ParamStore<double>&);

}  // namespace mtm
