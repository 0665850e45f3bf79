#include "bigcf/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "bigcf/errors.hpp"

namespace bigcf {

namespace {

constexpr char kMagic[8] = {'B', 'I', 'G', 'C', 'F', 'C', 'K', 'P'};

template <class T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T read_le(std::istream& in, const char* what) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw DataError(std::string("checkpoint truncated while reading ") + what);
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(buf[i]) << (8 * i);
  return value;
}

void write_mat_f32(std::ostream& out, const DenseMat& m) {
  for (double x : m.v) {
    const auto f = static_cast<float>(x);
    write_le(out, std::bit_cast<std::uint32_t>(f));
  }
}

void read_mat_f32(std::istream& in, DenseMat& m, const char* what) {
  for (double& x : m.v) {
    const auto bits = read_le<std::uint32_t>(in, what);
    x = static_cast<double>(std::bit_cast<float>(bits));
  }
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + s + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + s + "'");
  }
}

}  // namespace

std::map<std::string, std::string> config_to_map(const TrainConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["dim"] = std::to_string(cfg.dim);
  kv["batch-size"] = std::to_string(cfg.batch_size);
  kv["layers"] = std::to_string(cfg.layers);
  kv["intents"] = std::to_string(cfg.intents);
  kv["kappa"] = format_double(cfg.kappa);
  kv["tau"] = format_double(cfg.tau);
  kv["lambda1"] = format_double(cfg.lambda1);
  kv["lambda2"] = format_double(cfg.lambda2);
  kv["kl-weight"] = format_double(cfg.kl_weight);
  kv["lr"] = format_double(cfg.lr);
  kv["epochs"] = std::to_string(cfg.max_epochs);
  kv["patience"] = std::to_string(cfg.patience);
  kv["val-fraction"] = format_double(cfg.val_fraction);
  kv["seed"] = std::to_string(cfg.seed);
  kv["variant"] = to_string(cfg.variant);
  kv["noise-mode"] = to_string(cfg.noise_mode);
  kv["include-layer0"] = cfg.include_layer0 ? "1" : "0";
  kv["gcr-reduction"] = cfg.gcr_reduction == Reduction::mean ? "mean" : "sum";
  return kv;
}

TrainConfig config_from_map(const std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "dim") cfg.dim = static_cast<int>(parse_int(key, value));
    else if (key == "batch-size") cfg.batch_size = parse_int(key, value);
    else if (key == "layers") cfg.layers = static_cast<int>(parse_int(key, value));
    else if (key == "intents") cfg.intents = static_cast<int>(parse_int(key, value));
    else if (key == "kappa") cfg.kappa = parse_double(key, value);
    else if (key == "tau") cfg.tau = parse_double(key, value);
    else if (key == "lambda1") cfg.lambda1 = parse_double(key, value);
    else if (key == "lambda2") cfg.lambda2 = parse_double(key, value);
    else if (key == "kl-weight") cfg.kl_weight = parse_double(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "epochs") cfg.max_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "patience") cfg.patience = static_cast<int>(parse_int(key, value));
    else if (key == "val-fraction") cfg.val_fraction = parse_double(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "variant") cfg.variant = parse_variant(value);
    else if (key == "noise-mode") cfg.noise_mode = parse_noise_mode(value);
    else if (key == "include-layer0") cfg.include_layer0 = parse_int(key, value) != 0;
    else if (key == "gcr-reduction") {
      if (value == "mean") cfg.gcr_reduction = Reduction::mean;
      else if (value == "sum") cfg.gcr_reduction = Reduction::sum;
      else throw ConfigError("bad value for gcr-reduction: '" + value + "'");
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const TrainConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(params.num_users));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(params.num_items));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(cfg.dim));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(cfg.intents));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(cfg.layers));
  write_mat_f32(out, params.e0);
  write_mat_f32(out, params.table_users);
  write_mat_f32(out, params.table_items);

  std::ostringstream echo;
  for (const auto& [key, value] : config_to_map(cfg))
    echo << key << '=' << value << '\n';
  const std::string text = echo.str();
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint file (bad magic): " + path);
  const auto version = read_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));

  const auto m = static_cast<std::int64_t>(read_le<std::uint64_t>(in, "M"));
  const auto n = static_cast<std::int64_t>(read_le<std::uint64_t>(in, "N"));
  const auto d = static_cast<std::int64_t>(read_le<std::uint64_t>(in, "d"));
  const auto k = static_cast<std::int64_t>(read_le<std::uint64_t>(in, "K"));
  const auto l = static_cast<std::int64_t>(read_le<std::uint64_t>(in, "L"));
  if (m < 1 || n < 1 || d < 1 || k < 1 || l < 0)
    throw DataError("checkpoint header has invalid dimensions");

  Checkpoint ck;
  ck.params.num_users = m;
  ck.params.num_items = n;
  ck.params.e0 = DenseMat(m + n, d);
  ck.params.table_users = DenseMat(k, d);
  ck.params.table_items = DenseMat(k, d);
  read_mat_f32(in, ck.params.e0, "e0");
  read_mat_f32(in, ck.params.table_users, "table_users");
  read_mat_f32(in, ck.params.table_items, "table_items");
  ck.params.m_e0 = DenseMat(m + n, d);
  ck.params.v_e0 = DenseMat(m + n, d);
  ck.params.m_tu = DenseMat(k, d);
  ck.params.v_tu = DenseMat(k, d);
  ck.params.m_ti = DenseMat(k, d);
  ck.params.v_ti = DenseMat(k, d);

  const auto text_len = read_le<std::uint64_t>(in, "config length");
  std::string text(text_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(text_len)))
    throw DataError("checkpoint truncated while reading config echo");

  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("malformed config echo line: " + line);
    ck.config_echo[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ck.config = config_from_map(ck.config_echo);
  if (ck.config.dim != d || ck.config.intents != k || ck.config.layers != l)
    throw DataError("checkpoint header disagrees with config echo");
  return ck;
}

}  // namespace bigcf
