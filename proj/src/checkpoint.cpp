#include "anlcl/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace anlcl {

using nlohmann::ordered_json;

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  ordered_json index = ordered_json::array();
  for (const auto& [name, m] : data.tensors)
    index.push_back(ordered_json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  ordered_json header{{"iteration", data.iteration},
                      {"stage", data.stage},
                      {"config", data.config_json},
                      {"tensors", index}};
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, std::streamsize(std::strlen(kCheckpointMagic)));
  const std::uint64_t len = header_str.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_str.data(), std::streamsize(header_str.size()));
  for (const auto& [_, m] : data.tensors)
    out.write(reinterpret_cast<const char*>(m.data()), std::streamsize(m.size() * sizeof(float)));
  if (!out) throw Error(ErrorKind::io, "short write on checkpoint " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open checkpoint " + path.string());

  const std::size_t magic_len = std::strlen(kCheckpointMagic);
  std::string magic(magic_len, '\0');
  in.read(magic.data(), std::streamsize(magic_len));
  if (!in || magic != kCheckpointMagic)
    throw Error(ErrorKind::format, "bad checkpoint magic/version in " + path.string());

  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ull << 30)) throw Error(ErrorKind::format, "corrupt checkpoint header length");
  std::string header_str(len, '\0');
  in.read(header_str.data(), std::streamsize(len));
  if (!in) throw Error(ErrorKind::format, "truncated checkpoint header");

  ordered_json header;
  try {
    header = ordered_json::parse(header_str);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::format, "corrupt checkpoint header JSON");
  }

  CheckpointData data;
  try {
    data.iteration = header.at("iteration").get<long>();
    data.stage = header.at("stage").get<std::string>();
    data.config_json = header.at("config").get<std::string>();
    for (const auto& t : header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      if (rows < 0 || cols < 0 || rows * cols > (1ll << 31))
        throw Error(ErrorKind::format, "bad tensor extent in checkpoint");
      MatX<float> m(rows, cols);
      in.read(reinterpret_cast<char*>(m.data()), std::streamsize(m.size() * sizeof(float)));
      if (!in) throw Error(ErrorKind::format, "truncated checkpoint data for " + name);
      data.tensors.emplace_back(name, std::move(m));
    }
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::format, "malformed checkpoint header fields");
  }
  return data;
}

CheckpointData snapshot_params(const nn::ParamSet<float>& params, long iteration,
                               const std::string& stage, const std::string& config_json) {
  CheckpointData data;
  data.iteration = iteration;
  data.stage = stage;
  data.config_json = config_json;
  for (const auto& p : params) data.tensors.emplace_back(p.name, *p.value);
  return data;
}

void restore_params(const CheckpointData& data, const nn::ParamSet<float>& params) {
  if (data.tensors.size() != params.size())
    throw Error(ErrorKind::format, "checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, m] = data.tensors[i];
    if (name != params[i].name)
      throw Error(ErrorKind::format, "checkpoint parameter name mismatch: " + name + " vs " +
                                         params[i].name);
    if (m.rows() != params[i].value->rows() || m.cols() != params[i].value->cols())
      throw Error(ErrorKind::format, "checkpoint parameter shape mismatch: " + name);
    *params[i].value = m;
  }
}

}  // namespace anlcl
