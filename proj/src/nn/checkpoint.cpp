// SPDX-License-Identifier: Apache-2.0
#include "spn/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "spn/util/errors.hpp"

namespace spn::nn {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  std::uint64_t u(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ParseError("checkpoint: truncated at byte " + std::to_string(pos_));
  }
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const ParamStore& store) {
  std::vector<unsigned char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u64(out, store.size());
  for (const Parameter& p : store.entries()) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t extent : p.value.shape()) put_u64(out, extent);
    for (double v : p.value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

NamedTensors decode_checkpoint(const std::vector<unsigned char>& bytes) {
  Reader in(bytes);
  if (in.text(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw ParseError("checkpoint: bad magic");
  }
  const auto version = in.u(4);
  if (version != kCheckpointVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = in.u(8);
  NamedTensors out;
  for (std::uint64_t t = 0; t < count; ++t) {
    std::string name = in.text(in.u(4));
    const auto rank = in.u(4);
    ad::Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(in.u(8));
    std::vector<double> values(ad::shape_numel(shape));
    for (double& v : values) v = std::bit_cast<double>(in.u(8));
    out.emplace_back(std::move(name), ad::Tensor(std::move(shape), std::move(values)));
  }
  if (!in.done()) throw ParseError("checkpoint: trailing bytes");
  return out;
}

void write_checkpoint(const std::filesystem::path& path, const ParamStore& store) {
  const auto bytes = encode_checkpoint(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

NamedTensors read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void load_into(ParamStore& store, const NamedTensors& tensors) {
  if (tensors.size() != store.size()) {
    throw ValidationError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                          std::to_string(store.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const Parameter& p = store.at(i);
    const auto& [name, value] = tensors[i];
    if (name != p.name || value.shape() != p.value.shape()) {
      throw ValidationError("checkpoint tensor '" + name + "' " + ad::shape_str(value.shape()) +
                            " does not match model tensor '" + p.name + "' " + ad::shape_str(p.value.shape()));
    }
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) store.at(i).value = tensors[i].second.detached();
}

}  // namespace spn::nn
