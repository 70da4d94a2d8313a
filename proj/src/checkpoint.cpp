#include "szgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace szgan {

namespace {

static_assert(std::endian::native == std::endian::little, "container IO assumes a little-endian host");

constexpr std::size_t kMagicLen = 4;
constexpr std::size_t kLenBytes = 8;

std::string offset_msg(std::size_t offset, const std::string& what) {
  return "byte offset " + std::to_string(offset) + ": " + what;
}

}  // namespace

std::string encode_container(std::string_view magic, const json& header, std::span<const double> payload) {
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  std::string out;
  out.reserve(kMagicLen + kLenBytes + text.size() + payload.size_bytes());
  out.append(magic.substr(0, kMagicLen));
  out.append(reinterpret_cast<const char*>(&len), kLenBytes);
  out.append(text);
  out.append(reinterpret_cast<const char*>(payload.data()), payload.size_bytes());
  return out;
}

Container decode_container(std::string_view magic, std::string_view bytes) {
  if (bytes.size() < kMagicLen || bytes.substr(0, kMagicLen) != magic.substr(0, kMagicLen)) {
    throw ParseError(offset_msg(0, "expected magic '" + std::string(magic) + "'"));
  }
  if (bytes.size() < kMagicLen + kLenBytes) throw ParseError(offset_msg(kMagicLen, "truncated header length"));
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + kMagicLen, kLenBytes);
  const std::size_t header_at = kMagicLen + kLenBytes;
  if (len > bytes.size() - header_at) throw ParseError(offset_msg(header_at, "header length exceeds file size"));
  Container c;
  try {
    c.header = json::parse(bytes.substr(header_at, len));
  } catch (const json::parse_error& e) {
    throw ParseError(offset_msg(header_at + e.byte, std::string("malformed JSON header: ") + e.what()));
  }
  const std::size_t payload_at = header_at + len;
  c.payload_offset = payload_at;
  const std::size_t rest = bytes.size() - payload_at;
  if (rest % sizeof(double) != 0) {
    throw ParseError(offset_msg(payload_at + rest - rest % sizeof(double), "payload is not a whole number of float64"));
  }
  c.payload.resize(rest / sizeof(double));
  std::memcpy(c.payload.data(), bytes.data() + payload_at, rest);
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

std::string_view to_string(CheckpointRole role) {
  switch (role) {
    case CheckpointRole::generator: return "generator";
    case CheckpointRole::discriminator: return "discriminator";
    case CheckpointRole::trunk: return "trunk";
    case CheckpointRole::head: return "head";
  }
  return "head";
}

CheckpointRole checkpoint_role_from_string(std::string_view name) {
  for (auto r : {CheckpointRole::generator, CheckpointRole::discriminator, CheckpointRole::trunk,
                 CheckpointRole::head}) {
    if (to_string(r) == name) return r;
  }
  throw ParseError("unknown checkpoint role '" + std::string(name) + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  json layers = json::array();
  std::vector<double> payload;
  payload.reserve(std::size_t(ckpt.params.count()));
  for (const auto& [name, lp] : ckpt.params.layers) {
    layers.push_back({{"name", name},
                      {"weight_shape", lp.weight.shape()},
                      {"bias_shape", lp.bias.shape()},
                      {"trainable", lp.trainable}});
    payload.insert(payload.end(), lp.weight.ptr(), lp.weight.ptr() + lp.weight.size());
    payload.insert(payload.end(), lp.bias.ptr(), lp.bias.ptr() + lp.bias.size());
  }
  const json header = {{"role", to_string(ckpt.role)},
                       {"seed", ckpt.params.rng_seed},
                       {"layers", layers},
                       {"meta", ckpt.meta}};
  return encode_container("SZG1", header, payload);
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Container c = decode_container("SZG1", bytes);
  Checkpoint ckpt;
  try {
    ckpt.role = checkpoint_role_from_string(c.header.at("role").get<std::string>());
    ckpt.params.rng_seed = c.header.at("seed").get<std::uint64_t>();
    ckpt.meta = c.header.value("meta", json::object());
    std::size_t at = 0;
    auto take = [&](const Shape& shape) {
      const auto n = std::size_t(shape_size(shape));
      if (at + n > c.payload.size()) throw ParseError("checkpoint payload shorter than its header declares");
      Tensor t(shape, Eigen::Map<const Eigen::VectorXd>(c.payload.data() + at, Index(n)));
      at += n;
      return t;
    };
    for (const auto& layer : c.header.at("layers")) {
      LayerParams lp;
      lp.weight = take(layer.at("weight_shape").get<Shape>());
      lp.bias = take(layer.at("bias_shape").get<Shape>());
      lp.trainable = layer.at("trainable").get<bool>();
      ckpt.params.layers.emplace(layer.at("name").get<std::string>(), std::move(lp));
    }
    if (at != c.payload.size()) throw ParseError("checkpoint payload longer than its header declares");
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint header: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingArtifactError("missing checkpoint '" + path.string() + "'");
  return decode_checkpoint(read_file(path));
}

}  // namespace szgan
