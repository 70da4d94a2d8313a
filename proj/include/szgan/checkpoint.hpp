#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "szgan/network.hpp"

namespace szgan {

using json = nlohmann::json;

// Binary container shared by the SZG1 / SZR1 / SZS1 files:
//   4-byte magic | u64 little-endian header length | JSON header | little-endian float64 payload
struct Container {
  json header;
  std::vector<double> payload;
  std::size_t payload_offset = 0;
};

std::string encode_container(std::string_view magic, const json& header, std::span<const double> payload);
/// Throws ParseError naming the byte offset of the first problem.
Container decode_container(std::string_view magic, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::string_view bytes);

enum class CheckpointRole { generator, discriminator, trunk, head };

std::string_view to_string(CheckpointRole role);
CheckpointRole checkpoint_role_from_string(std::string_view name);

struct Checkpoint {
  CheckpointRole role = CheckpointRole::head;
  Parameters params;
  json meta = json::object();
};

/// "SZG1" container. The header lists layers in name order with their shapes, trainable flag,
/// seed, role and `meta`; the payload holds each layer's weight then bias.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws MissingArtifactError when the file does not exist.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace szgan
