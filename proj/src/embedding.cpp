#include "pipeboost/embedding.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "pipeboost/error.hpp"
#include "pipeboost/io.hpp"

namespace pipeboost {

EmbeddingTensor build_embedding(const DeviceProfile& profile) {
  const CostTable costs(profile);
  EmbeddingTensor tensor(
      {profile.unit_count(), profile.model_count(), profile.max_layers()});
  const double scale = costs.max_cost();
  for (std::size_t u = 0; u < profile.unit_count(); ++u) {
    for (std::size_t m = 0; m < profile.model_count(); ++m) {
      for (std::size_t l = 0; l < profile.models[m].layer_count(); ++l) {
        tensor.at(u, m, l) = costs(m, l, static_cast<UnitId>(u)) / scale;
      }
    }
  }
  return tensor;
}

MaskTensor build_mask(const Workload& workload, const Mapping& mapping,
                      const DeviceProfile& profile) {
  validate(workload, profile);
  validate(mapping, workload, profile);
  MaskTensor mask({profile.unit_count(), profile.model_count(), profile.max_layers()});
  for (std::size_t i = 0; i < workload.size(); ++i) {
    const auto& row = mapping.assignments[i];
    for (std::size_t l = 0; l < row.size(); ++l) {
      mask.at(static_cast<std::size_t>(row[l]), workload[i], l) = 1;
    }
  }
  return mask;
}

EmbeddingTensor masked_input(const EmbeddingTensor& embedding, const MaskTensor& mask) {
  if (!(embedding.dims() == mask.dims())) {
    throw Error(Errc::DimensionMismatch, "masked_input: embedding and mask dims differ");
  }
  EmbeddingTensor out(embedding.dims());
  const auto& e = embedding.data();
  const auto& k = mask.data();
  auto& o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = k[i] ? e[i] : 0.0;
  return out;
}

namespace {

constexpr std::array<char, 4> kEmbMagic{'E', 'M', 'B', '1'};

void put_u16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b.data(), 2);
}

std::uint16_t get_u16(std::istream& in) {
  std::array<unsigned char, 2> b{};
  in.read(reinterpret_cast<char*>(b.data()), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace

void dump_embedding(const EmbeddingTensor& tensor, const DeviceProfile& profile,
                    const std::filesystem::path& path) {
  const auto& d = tensor.dims();
  if (d.units > 0xffff || d.rows > 0xffff || d.cols > 0xffff) {
    throw Error(Errc::TooLarge, "embedding dims exceed 16 bits");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open '" + path.string() + "' for writing");
  out.write(kEmbMagic.data(), 4);
  put_u16(out, static_cast<std::uint16_t>(d.units));
  put_u16(out, static_cast<std::uint16_t>(d.rows));
  put_u16(out, static_cast<std::uint16_t>(d.cols));
  put_u16(out, 0);
  for (double v : tensor.data()) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    std::array<char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(b.data(), 4);
  }
  if (!out) throw Error(Errc::Io, "write to '" + path.string() + "' failed");

  nlohmann::json meta = {{"magic", "EMB1"},
                         {"dims", {d.units, d.rows, d.cols}},
                         {"order", "unit,model,layer"},
                         {"dtype", "f32le"},
                         {"models", nlohmann::json::array()}};
  for (const auto& m : profile.models) {
    meta["models"].push_back({{"name", m.name}, {"layers", m.layer_count()}});
  }
  write_json(meta, path.string() + ".json");
}

EmbeddingTensor read_embedding_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path.string() + "' for reading");
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (magic != kEmbMagic) throw Error(Errc::Io, "'" + path.string() + "' is not an EMB1 dump");
  TensorDims d;
  d.units = get_u16(in);
  d.rows = get_u16(in);
  d.cols = get_u16(in);
  get_u16(in);
  EmbeddingTensor t(d);
  for (auto& v : t.data()) {
    std::array<unsigned char, 4> b{};
    in.read(reinterpret_cast<char*>(b.data()), 4);
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    v = std::bit_cast<float>(bits);
  }
  if (!in) throw Error(Errc::Io, "'" + path.string() + "' is truncated");
  return t;
}

}  // namespace pipeboost
