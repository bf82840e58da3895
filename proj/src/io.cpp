#include "cremid/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cremid/errors.hpp"

namespace cremid {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  return out;
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

double num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

Vector json_vec(const json& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = num(a[i]);
  return v;
}

json counter_json(const MoveCounter& c) { return json::array({c.proposed, c.accepted}); }
MoveCounter json_counter(const json& a) { return {a.at(0).get<long>(), a.at(1).get<long>()}; }

std::string join_values(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v(i));
  }
  return out;
}

std::string join_matrix(const Matrix& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!out.empty()) out += ',';
      out += format_double(m(r, c));
    }
  return out;
}

Vector parse_values(const ConfigEntry& e, int expected) {
  const auto cells = split(e.value, ',');
  if (static_cast<int>(cells.size()) != expected) {
    throw ValidationError(e.where + ": '" + e.key + "' needs " + std::to_string(expected) + " values, got " +
                          std::to_string(cells.size()));
  }
  Vector v(expected);
  for (int i = 0; i < expected; ++i) v(i) = parse_double(cells[static_cast<std::size_t>(i)], e.where);
  return v;
}

long parse_long(const ConfigEntry& e) {
  long v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError(e.where + ": '" + e.key + "' expects an integer, got '" + e.value + "'");
  }
  return v;
}

std::uint64_t parse_u64(const ConfigEntry& e) {
  std::uint64_t v = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError(e.where + ": '" + e.key + "' expects an unsigned integer, got '" + e.value + "'");
  }
  return v;
}

bool parse_bool(const ConfigEntry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw ValidationError(e.where + ": '" + e.key + "' expects true or false, got '" + e.value + "'");
}

SpdMatrix parse_spd(const ConfigEntry& e, int p) {
  const Vector v = parse_values(e, p * p);
  Matrix m(p, p);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c) m(r, c) = v(r * p + c);
  try {
    return SpdMatrix(m);
  } catch (const std::exception& ex) {
    throw ValidationError(e.where + ": '" + e.key + "' is not symmetric positive definite");
  }
}

void write_jsonl_line(std::ostream& out, const json& j) { out << j.dump() << '\n'; }

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": malformed record");
    }
  }
  return out;
}

void expect_count(const fs::path& path, std::size_t have, std::size_t want) {
  if (have != want) {
    throw ValidationError(path.string() + ": record count mismatch (found " + std::to_string(have) +
                          ", meta declares " + std::to_string(want) + ")");
  }
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* first = t.data();
  const char* last = first + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc() || ptr != last) {
    throw ValidationError(where + ": non-numeric value '" + t + "'");
  }
  return v;
}

MultiSampleDataset read_dataset(std::istream& in, const std::string& source) {
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header = split(line, ',');
      break;
    }
  }
  if (header.empty()) throw ValidationError(source + ": empty file");
  int sample_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == "sample") sample_col = static_cast<int>(c);
  if (sample_col < 0) throw ValidationError(source + ":" + std::to_string(lineno) + ": missing column 'sample'");
  const int p = static_cast<int>(header.size()) - 1;
  if (p < 1) throw ValidationError(source + ":" + std::to_string(lineno) + ": no data columns");

  std::vector<std::string> labels;
  std::map<std::string, int> index;
  std::vector<std::vector<double>> values;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    const std::string where = source + ":" + std::to_string(lineno);
    if (cells.size() != header.size()) {
      throw ValidationError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(cells.size()));
    }
    const std::string& label = cells[static_cast<std::size_t>(sample_col)];
    if (label.empty()) throw ValidationError(where + ": empty sample label");
    auto [it, inserted] = index.emplace(label, static_cast<int>(labels.size()));
    if (inserted) {
      labels.push_back(label);
      values.emplace_back();
    }
    auto& row = values[static_cast<std::size_t>(it->second)];
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<int>(c) == sample_col) continue;
      const double v = parse_double(cells[c], where);
      if (!std::isfinite(v)) throw ValidationError(where + ": non-finite value");
      row.push_back(v);
    }
  }
  if (labels.empty()) throw ValidationError(source + ": no data rows");

  MultiSampleDataset data;
  data.dim = p;
  data.labels = labels;
  for (const auto& flat : values) {
    const Eigen::Index n = static_cast<Eigen::Index>(flat.size()) / p;
    Matrix m(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int d = 0; d < p; ++d) m(i, d) = flat[static_cast<std::size_t>(i * p + d)];
    data.samples.push_back(std::move(m));
  }
  return data;
}

MultiSampleDataset read_dataset(const fs::path& path) {
  std::ifstream in = open_in(path);
  return read_dataset(in, path.string());
}

void write_dataset(const MultiSampleDataset& data, std::ostream& out) {
  out << "sample";
  for (int d = 0; d < data.dim; ++d) out << ",dim_" << d + 1;
  out << '\n';
  for (int j = 0; j < data.num_samples(); ++j) {
    const std::string label =
        j < static_cast<int>(data.labels.size()) ? data.labels[j] : "sample_" + std::to_string(j + 1);
    for (int i = 0; i < data.size(j); ++i) {
      out << label;
      for (int d = 0; d < data.dim; ++d) out << ',' << format_double(data.samples[j](i, d));
      out << '\n';
    }
  }
}

void write_dataset(const MultiSampleDataset& data, const fs::path& path) {
  std::ofstream out = open_out(path);
  write_dataset(data, out);
}

std::vector<ConfigEntry> parse_config(std::istream& in, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + ": expected key=value");
    ConfigEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where};
    if (e.key.empty()) throw ValidationError(where + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ConfigEntry> parse_config(const fs::path& path) {
  std::ifstream in = open_in(path);
  return parse_config(in, path.string());
}

RunConfig resolve_config(const MultiSampleDataset& data, const std::vector<ConfigEntry>& entries) {
  check_dataset(data);
  const int p = data.dim;
  int K0 = 10, K1 = 10;
  for (const ConfigEntry& e : entries) {
    if (e.key == "model.K0") K0 = static_cast<int>(parse_long(e));
    if (e.key == "model.K1") K1 = static_cast<int>(parse_long(e));
  }
  if (K0 < 1 || K1 < 1) throw ValidationError("model.K0 and model.K1 must be >= 1");

  RunConfig cfg;
  cfg.hp = default_hyperparams(data, K0, K1);
  HyperParams& hp = cfg.hp;
  SamplerConfig& s = cfg.sampler;
  const std::map<std::string, double*> reals = {
      {"prior.a_rho", &hp.a_rho},         {"prior.b_rho", &hp.b_rho},
      {"prior.tau_alpha1", &hp.tau_alpha1}, {"prior.tau_alpha2", &hp.tau_alpha2},
      {"prior.nu1", &hp.nu1},             {"prior.nu2", &hp.nu2},
      {"prior.tau1", &hp.tau1},           {"prior.tau2", &hp.tau2},
      {"prior.a_eps", &hp.a_eps},         {"prior.b_eps", &hp.b_eps},
      {"prior.a_phi", &hp.a_phi},         {"prior.b_phi", &hp.b_phi},
      {"sampler.alpha_proposal_a", &s.alpha_proposal_a},
      {"sampler.target_acceptance", &s.target_acceptance}};
  const std::map<std::string, int*> ints = {{"sampler.n_burnin", &s.n_burnin},
                                            {"sampler.n_draws", &s.n_draws},
                                            {"sampler.thin", &s.thin},
                                            {"sampler.swap_moves_per_sweep", &s.swap_moves_per_sweep},
                                            {"sampler.chains", &cfg.chains}};
  const std::map<std::string, bool*> flags = {{"sampler.save_z", &s.save_z},
                                              {"sampler.save_group_means", &s.save_group_means},
                                              {"sampler.accumulate_calibration", &s.accumulate_calibration},
                                              {"sampler.paper_literal", &s.paper_literal},
                                              {"sampler.validate_every_sweep", &s.validate_every_sweep}};

  for (const ConfigEntry& e : entries) {
    if (e.key == "model.K0" || e.key == "model.K1") continue;
    if (auto it = reals.find(e.key); it != reals.end()) {
      *it->second = parse_double(e.value, e.where);
    } else if (auto it2 = ints.find(e.key); it2 != ints.end()) {
      *it2->second = static_cast<int>(parse_long(e));
    } else if (auto it3 = flags.find(e.key); it3 != flags.end()) {
      *it3->second = parse_bool(e);
    } else if (e.key == "model.init") {
      try {
        s.init = parse_init_strategy(e.value);
      } catch (const ValidationError& ex) {
        throw ValidationError(e.where + ": " + ex.what());
      }
    } else if (e.key == "sampler.seed") {
      s.seed = parse_u64(e);
    } else if (e.key == "prior.m2") {
      hp.m2 = parse_values(e, p);
    } else if (e.key == "prior.S2") {
      hp.S2 = parse_spd(e, p);
    } else if (e.key == "prior.Psi2") {
      hp.Psi2 = parse_spd(e, p);
    } else {
      throw ValidationError(e.where + ": unknown configuration key '" + e.key + "'");
    }
  }
  if (cfg.chains < 1) throw ValidationError("sampler.chains must be >= 1");
  check_hyperparams(hp);
  check_sampler_config(s);
  return cfg;
}

std::vector<std::pair<std::string, std::string>> describe_config(const RunConfig& cfg) {
  const HyperParams& hp = cfg.hp;
  const SamplerConfig& s = cfg.sampler;
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"model.K0", std::to_string(hp.K0)},
      {"model.K1", std::to_string(hp.K1)},
      {"model.init", to_string(s.init)},
      {"prior.a_rho", format_double(hp.a_rho)},
      {"prior.b_rho", format_double(hp.b_rho)},
      {"prior.tau_alpha1", format_double(hp.tau_alpha1)},
      {"prior.tau_alpha2", format_double(hp.tau_alpha2)},
      {"prior.nu1", format_double(hp.nu1)},
      {"prior.nu2", format_double(hp.nu2)},
      {"prior.Psi2", join_matrix(hp.Psi2.matrix())},
      {"prior.m2", join_values(hp.m2)},
      {"prior.S2", join_matrix(hp.S2.matrix())},
      {"prior.tau1", format_double(hp.tau1)},
      {"prior.tau2", format_double(hp.tau2)},
      {"prior.a_eps", format_double(hp.a_eps)},
      {"prior.b_eps", format_double(hp.b_eps)},
      {"prior.a_phi", format_double(hp.a_phi)},
      {"prior.b_phi", format_double(hp.b_phi)},
      {"sampler.seed", std::to_string(s.seed)},
      {"sampler.chains", std::to_string(cfg.chains)},
      {"sampler.n_burnin", std::to_string(s.n_burnin)},
      {"sampler.n_draws", std::to_string(s.n_draws)},
      {"sampler.thin", std::to_string(s.thin)},
      {"sampler.swap_moves_per_sweep", std::to_string(s.swap_moves_per_sweep)},
      {"sampler.alpha_proposal_a", format_double(s.alpha_proposal_a)},
      {"sampler.target_acceptance", format_double(s.target_acceptance)},
      {"sampler.save_z", b(s.save_z)},
      {"sampler.save_group_means", b(s.save_group_means)},
      {"sampler.accumulate_calibration", b(s.accumulate_calibration)},
      {"sampler.paper_literal", b(s.paper_literal)},
      {"sampler.validate_every_sweep", b(s.validate_every_sweep)},
  };
}

void persist_draws(const ChainDraws& draws, const fs::path& dir) {
  fs::create_directories(dir);
  const RunInfo& info = draws.info;
  json meta;
  meta["format_version"] = kFormatVersion;
  meta["complete"] = false;
  meta["seed"] = info.seed;
  meta["stream_id"] = info.stream_id;
  meta["data_hash"] = info.data_hash;
  meta["paper_literal"] = info.paper_literal;
  meta["J"] = info.J;
  meta["p"] = info.p;
  meta["K0"] = info.K0;
  meta["K1"] = info.K1;
  meta["labels"] = info.labels;
  meta["sample_sizes"] = info.sample_sizes;
  json config = json::array();
  for (const auto& [k, v] : info.config) config.push_back(json::array({k, v}));
  meta["config"] = config;
  // The header goes first so readers of an in-flight run see it marked
  // incomplete; it is rewritten once every record file is closed.
  {
    std::ofstream out = open_out(dir / "meta.json");
    out << meta.dump(2) << '\n';
  }

  {
    std::ofstream out = open_out(dir / "scalars.jsonl");
    for (const ScalarDraw& s : draws.scalars) {
      write_jsonl_line(out, {{"sweep", s.sweep},
                             {"rho", s.rho},
                             {"epsilon", s.epsilon},
                             {"alpha", s.alpha},
                             {"varphi", s.varphi},
                             {"k0", s.k0},
                             {"log_density", s.log_density},
                             {"swap", counter_json(s.counters.swap)},
                             {"alpha_moves", counter_json(s.counters.alpha)},
                             {"epsilon_moves", counter_json(s.counters.epsilon)}});
    }
  }
  {
    std::ofstream out = open_out(dir / "clusters.jsonl");
    for (const ClusterDraw& c : draws.clusters) {
      json rec;
      rec["S"] = c.perturbed;
      json pi = json::array();
      for (Eigen::Index j = 0; j < c.pi.rows(); ++j) pi.push_back(vec_json(c.pi.row(j).transpose()));
      rec["pi"] = pi;
      json mu0 = json::array(), sigma = json::array();
      for (const Vector& m : c.mu0) mu0.push_back(vec_json(m));
      for (const SpdMatrix& s : c.sigma) sigma.push_back(vec_json(pack_lower(s.matrix())));
      rec["mu0"] = mu0;
      rec["sigma"] = sigma;
      if (c.has_group_means()) {
        json mu = json::array();
        for (const auto& per_sample : c.mu) {
          json row = json::array();
          for (const Vector& m : per_sample) row.push_back(vec_json(m));
          mu.push_back(row);
        }
        rec["mu"] = mu;
      }
      if (!c.z.empty()) rec["z"] = c.z;
      write_jsonl_line(out, rec);
    }
  }
  std::size_t calibration_records = 0;
  if (draws.calibration) {
    const CalibrationAccumulator& acc = *draws.calibration;
    std::ofstream out = open_out(dir / "calibration.jsonl");
    const std::vector<Matrix> mean = acc.mean_delta();
    for (std::size_t j = 0; j < acc.delta_sum.size(); ++j) {
      for (Eigen::Index i = 0; i < acc.delta_sum[j].rows(); ++i) {
        write_jsonl_line(out, {{"sample", j},
                               {"index", i},
                               {"mean", vec_json(mean[j].row(i).transpose())},
                               {"sum", vec_json(acc.delta_sum[j].row(i).transpose())}});
        ++calibration_records;
      }
    }
  } else if (fs::exists(dir / "calibration.jsonl")) {
    fs::remove(dir / "calibration.jsonl");
  }

  json records;
  records["scalars"] = draws.scalars.size();
  records["clusters"] = draws.clusters.size();
  if (draws.calibration) {
    records["calibration"] = calibration_records;
    meta["calibration_draws"] = draws.calibration->draws;
  }
  meta["records"] = records;
  meta["complete"] = true;
  std::ofstream out = open_out(dir / "meta.json");
  out << meta.dump(2) << '\n';
}

ChainDraws load_draws(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  json meta;
  {
    std::ifstream in = open_in(meta_path);
    try {
      meta = json::parse(in);
    } catch (const json::exception&) {
      throw ValidationError(meta_path.string() + ": malformed run header");
    }
  }
  try {
    const int version = meta.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw ValidationError(meta_path.string() + ": format version " + std::to_string(version) +
                            " is not supported (expected " + std::to_string(kFormatVersion) + ")");
    }
    if (!meta.at("complete").get<bool>()) throw ValidationError(meta_path.string() + ": run is incomplete");

    ChainDraws draws;
    RunInfo& info = draws.info;
    info.format_version = version;
    info.seed = meta.at("seed").get<std::uint64_t>();
    info.stream_id = meta.at("stream_id").get<std::uint64_t>();
    info.data_hash = meta.at("data_hash").get<std::string>();
    info.paper_literal = meta.at("paper_literal").get<bool>();
    info.J = meta.at("J").get<int>();
    info.p = meta.at("p").get<int>();
    info.K0 = meta.at("K0").get<int>();
    info.K1 = meta.at("K1").get<int>();
    info.labels = meta.at("labels").get<std::vector<std::string>>();
    info.sample_sizes = meta.at("sample_sizes").get<std::vector<int>>();
    for (const json& kv : meta.at("config")) info.config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    const json& records = meta.at("records");
    const int K = info.K0 + info.K1;

    const auto scalars = read_jsonl(dir / "scalars.jsonl");
    expect_count(dir / "scalars.jsonl", scalars.size(), records.at("scalars").get<std::size_t>());
    for (const json& r : scalars) {
      ScalarDraw s;
      s.sweep = r.at("sweep").get<long>();
      s.rho = num(r.at("rho"));
      s.epsilon = num(r.at("epsilon"));
      s.alpha = num(r.at("alpha"));
      s.varphi = num(r.at("varphi"));
      s.k0 = num(r.at("k0"));
      s.log_density = num(r.at("log_density"));
      s.counters.swap = json_counter(r.at("swap"));
      s.counters.alpha = json_counter(r.at("alpha_moves"));
      s.counters.epsilon = json_counter(r.at("epsilon_moves"));
      draws.scalars.push_back(s);
    }

    const auto clusters = read_jsonl(dir / "clusters.jsonl");
    expect_count(dir / "clusters.jsonl", clusters.size(), records.at("clusters").get<std::size_t>());
    for (const json& r : clusters) {
      ClusterDraw c;
      c.perturbed = r.at("S").get<std::vector<std::uint8_t>>();
      const json& pi = r.at("pi");
      c.pi = Matrix(info.J, K);
      for (int j = 0; j < info.J; ++j) c.pi.row(j) = json_vec(pi.at(static_cast<std::size_t>(j))).transpose();
      for (const json& m : r.at("mu0")) c.mu0.push_back(json_vec(m));
      for (const json& s : r.at("sigma")) c.sigma.push_back(SpdMatrix(unpack_lower(json_vec(s), info.p)));
      if (r.contains("mu")) {
        for (const json& row : r.at("mu")) {
          std::vector<Vector> per_sample;
          for (const json& m : row) per_sample.push_back(json_vec(m));
          c.mu.push_back(std::move(per_sample));
        }
      }
      if (r.contains("z")) c.z = r.at("z").get<std::vector<std::vector<int>>>();
      if (static_cast<int>(c.perturbed.size()) != K || static_cast<int>(c.mu0.size()) != K ||
          static_cast<int>(c.sigma.size()) != K) {
        throw ValidationError((dir / "clusters.jsonl").string() + ": cluster record has the wrong size");
      }
      draws.clusters.push_back(std::move(c));
    }

    if (records.contains("calibration")) {
      const fs::path path = dir / "calibration.jsonl";
      const auto cal = read_jsonl(path);
      expect_count(path, cal.size(), records.at("calibration").get<std::size_t>());
      CalibrationAccumulator acc;
      acc.draws = meta.at("calibration_draws").get<long>();
      for (int n : info.sample_sizes) acc.delta_sum.push_back(Matrix::Zero(n, info.p));
      for (const json& r : cal) {
        const auto j = r.at("sample").get<std::size_t>();
        const auto i = r.at("index").get<Eigen::Index>();
        if (j >= acc.delta_sum.size() || i < 0 || i >= acc.delta_sum[j].rows()) {
          throw ValidationError(path.string() + ": observation index out of range");
        }
        acc.delta_sum[j].row(i) = json_vec(r.at("sum")).transpose();
      }
      draws.calibration = std::move(acc);
    }
    return draws;
  } catch (const json::exception& ex) {
    throw ValidationError(dir.string() + ": malformed run directory (" + ex.what() + ")");
  }
}

}  // namespace cremid
