#include "kinseq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace kinseq {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is defined little-endian");

namespace {

constexpr char kMagic[8] = {'K', 'S', 'E', 'Q', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

struct NamedTensor {
  std::string name;
  const double* read = nullptr;
  double* write = nullptr;
  Index rows = 0, cols = 0;
  Index size() const { return rows * cols; }
};

void collect(std::vector<NamedTensor>& out, const Checkpoint& cp) {
  for (const auto& v : tensor_views(cp.model))
    out.push_back({v.name, v.data, nullptr, v.rows, v.cols});
  out.push_back({"stats.mean", cp.stats.mean.data(), nullptr,
                 cp.stats.mean.size(), 1});
  out.push_back({"stats.std", cp.stats.stddev.data(), nullptr,
                 cp.stats.stddev.size(), 1});
  if (cp.has_optimizer) {
    out.push_back({"adam.learning_rate", &cp.adam.learning_rate, nullptr, 1, 1});
    out.push_back({"adam.beta1", &cp.adam.beta1, nullptr, 1, 1});
    out.push_back({"adam.beta2", &cp.adam.beta2, nullptr, 1, 1});
    out.push_back({"adam.epsilon", &cp.adam.epsilon, nullptr, 1, 1});
    for (const auto& v : tensor_views(cp.adam.m))
      out.push_back({"adam.m." + v.name, v.data, nullptr, v.rows, v.cols});
    for (const auto& v : tensor_views(cp.adam.u))
      out.push_back({"adam.u." + v.name, v.data, nullptr, v.rows, v.cols});
  }
}

void collect_writable(std::vector<NamedTensor>& out, Checkpoint& cp) {
  for (auto& v : tensor_views(cp.model))
    out.push_back({v.name, nullptr, v.data, v.rows, v.cols});
  out.push_back({"stats.mean", nullptr, cp.stats.mean.data(),
                 cp.stats.mean.size(), 1});
  out.push_back({"stats.std", nullptr, cp.stats.stddev.data(),
                 cp.stats.stddev.size(), 1});
  if (cp.has_optimizer) {
    out.push_back({"adam.learning_rate", nullptr, &cp.adam.learning_rate, 1, 1});
    out.push_back({"adam.beta1", nullptr, &cp.adam.beta1, 1, 1});
    out.push_back({"adam.beta2", nullptr, &cp.adam.beta2, 1, 1});
    out.push_back({"adam.epsilon", nullptr, &cp.adam.epsilon, 1, 1});
    for (auto& v : tensor_views(cp.adam.m))
      out.push_back({"adam.m." + v.name, nullptr, v.data, v.rows, v.cols});
    for (auto& v : tensor_views(cp.adam.u))
      out.push_back({"adam.u." + v.name, nullptr, v.data, v.rows, v.cols});
  }
}

nlohmann::json model_config_json(const ModelConfig& c) {
  return {{"n_x", c.n_x},         {"n_h", c.n_h},
          {"n_c", c.n_c},         {"t_past", c.t_past},
          {"t_future", c.t_future}, {"variant", to_string(c.variant)},
          {"decoder_bridge", to_string(c.bridge)}, {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_x = j.at("n_x").get<Index>();
  c.n_h = j.at("n_h").get<Index>();
  c.n_c = j.at("n_c").get<Index>();
  c.t_past = j.at("t_past").get<Index>();
  c.t_future = j.at("t_future").get<Index>();
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.bridge = bridge_from_string(j.at("decoder_bridge").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  std::vector<NamedTensor> tensors;
  collect(tensors, cp);

  nlohmann::json header;
  header["model"] = model_config_json(cp.model.config);
  header["step"] = cp.step;
  header["rng"] = cp.rng_state.empty() ? nlohmann::json(nullptr)
                                       : nlohmann::json(cp.rng_state);
  header["optimizer"] = cp.has_optimizer
                            ? nlohmann::json({{"t", cp.adam.t}})
                            : nlohmann::json(nullptr);
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    header["tensors"].push_back({{"name", t.name},
                                 {"rows", t.rows},
                                 {"cols", t.cols},
                                 {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.size()) * sizeof(double);
  }
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(hs.size()));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& t : tensors)
    out.write(reinterpret_cast<const char*>(t.read),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!out) throw DataError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError("checkpoint: bad magic in " + path.string());
  const auto version = read_u32(in);
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " +
                    std::to_string(version));
  const auto header_len = read_u32(in);
  std::string hs(header_len, '\0');
  in.read(hs.data(), header_len);
  if (!in) throw DataError("checkpoint: truncated header in " + path.string());
  const auto header = nlohmann::json::parse(hs);

  Checkpoint cp;
  const ModelConfig cfg = model_config_from_json(header.at("model"));
  cp.model = zeros_like(Model{cfg, {}, {}, {}});
  cp.step = header.at("step").get<std::uint64_t>();
  if (!header.at("rng").is_null())
    cp.rng_state = header.at("rng").get<std::string>();
  cp.has_optimizer = !header.at("optimizer").is_null();
  if (cp.has_optimizer) {
    cp.adam = adam_init(cp.model, 0.0);
    cp.adam.t = header.at("optimizer").at("t").get<std::uint64_t>();
  }

  // size the stats from the header before wiring write targets
  for (const auto& tj : header.at("tensors")) {
    const auto name = tj.at("name").get<std::string>();
    if (name == "stats.mean") cp.stats.mean.resize(tj.at("rows").get<Index>());
    if (name == "stats.std") cp.stats.stddev.resize(tj.at("rows").get<Index>());
  }

  std::vector<NamedTensor> tensors;
  collect_writable(tensors, cp);
  std::map<std::string, NamedTensor*> by_name;
  for (auto& t : tensors) by_name[t.name] = &t;

  const std::streampos payload_start = in.tellg();
  std::size_t seen = 0;
  for (const auto& tj : header.at("tensors")) {
    const auto name = tj.at("name").get<std::string>();
    const auto it = by_name.find(name);
    if (it == by_name.end())
      throw DataError("checkpoint: unexpected tensor '" + name + "'");
    NamedTensor& t = *it->second;
    if (t.rows != tj.at("rows").get<Index>() ||
        t.cols != tj.at("cols").get<Index>())
      throw DataError("checkpoint: tensor '" + name +
                      "' shape does not match the model config");
    in.seekg(payload_start +
             static_cast<std::streamoff>(tj.at("offset").get<std::uint64_t>()));
    in.read(reinterpret_cast<char*>(t.write),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint: truncated payload in " +
                             path.string());
    ++seen;
  }
  if (seen != tensors.size())
    throw DataError("checkpoint: missing tensors in " + path.string());
  return cp;
}

}  // namespace kinseq
