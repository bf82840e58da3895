#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cremid/errors.hpp"
#include "cremid/io.hpp"
#include "cremid/scenario.hpp"

using namespace cremid;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cremid_unit_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("doubles round-trip through text") {
  for (double x : {0.1, -1e-300, 3.141592653589793, 1e300, 5e-324, -0.0}) {
    CHECK(parse_double(format_double(x), "here") == x);
  }
  CHECK(error_of([] { parse_double("1.5x", "f.csv:4"); }).find("f.csv:4") != std::string::npos);
}

TEST_CASE("reading datasets") {
  std::istringstream in("sample,dim_1,dim_2\nb,1,2\na,3,4\nb,5,6\na,7,8\nb,9,10\na,11,12\n");
  const MultiSampleDataset d = read_dataset(in, "t.csv");
  CHECK(d.num_samples() == 2);
  CHECK(d.dim == 2);
  CHECK(d.size(0) == 3);
  CHECK(d.size(1) == 3);
  CHECK(d.labels == std::vector<std::string>{"b", "a"});
  CHECK(d.samples[1](2, 1) == 12.0);

  SUBCASE("missing sample column") {
    std::istringstream bad("group,dim_1\na,1\n");
    const std::string msg = error_of([&] { read_dataset(bad, "t.csv"); });
    CHECK(msg.find("'sample'") != std::string::npos);
  }
  SUBCASE("ragged row") {
    std::istringstream bad("sample,dim_1,dim_2\na,1,2\na,3\n");
    CHECK(error_of([&] { read_dataset(bad, "t.csv"); }).find("t.csv:3") != std::string::npos);
  }
  SUBCASE("non-numeric value") {
    std::istringstream bad("sample,dim_1\na,1\na,abc\n");
    CHECK(error_of([&] { read_dataset(bad, "t.csv"); }).find("t.csv:3") != std::string::npos);
  }
  SUBCASE("empty input") {
    std::istringstream bad("");
    CHECK_FALSE(error_of([&] { read_dataset(bad, "t.csv"); }).empty());
  }
}

TEST_CASE("datasets round-trip bit for bit") {
  const MultiSampleDataset data = generate(make_scenario(ScenarioKind::calibration_demo, 2), 200).data;
  std::stringstream buf;
  write_dataset(data, buf);
  const MultiSampleDataset back = read_dataset(buf, "mem");
  CHECK(back.labels == data.labels);
  CHECK(back.samples == data.samples);
}

TEST_CASE("configuration") {
  const MultiSampleDataset data = generate(make_scenario(ScenarioKind::local_shift, 2), 30).data;
  std::istringstream in(
      "# short run\nmodel.K0 = 3\nmodel.K1=4\nsampler.n_draws=10  # trailing\nprior.m2 = 1,2,3,4\n"
      "sampler.paper_literal=true\n");
  const RunConfig cfg = resolve_config(data, parse_config(in, "c.txt"));
  CHECK(cfg.hp.K0 == 3);
  CHECK(cfg.hp.K1 == 4);
  CHECK(cfg.sampler.n_draws == 10);
  CHECK(cfg.sampler.paper_literal);
  CHECK(cfg.hp.m2(3) == 4.0);

  SUBCASE("unknown key names its location") {
    std::istringstream bad("model.K0=3\nsampler.n_drawz=5\n");
    CHECK(error_of([&] { resolve_config(data, parse_config(bad, "c.txt")); }).find("c.txt:2") != std::string::npos);
  }
  SUBCASE("bad value") {
    std::istringstream bad("prior.nu1=-4\n");
    CHECK_THROWS_AS(resolve_config(data, parse_config(bad, "c.txt")), ValidationError);
  }
  SUBCASE("described configuration resolves to itself") {
    const auto described = describe_config(cfg);
    std::vector<ConfigEntry> entries;
    for (const auto& [k, v] : described) entries.push_back({k, v, "described"});
    CHECK(describe_config(resolve_config(data, entries)) == described);
  }
}

TEST_CASE("persisted draws") {
  const MultiSampleDataset data = generate(make_scenario(ScenarioKind::local_weight, 3), 25).data;
  SamplerConfig sc;
  sc.seed = 3;
  sc.n_burnin = 20;
  sc.n_draws = 12;
  sc.save_z = true;
  sc.paper_literal = true;
  ChainDraws draws = run_chain(data, default_hyperparams(data, 3, 3), sc).draws;
  draws.info.config = {{"sampler.seed", "3"}, {"model.K0", "3"}};
  const fs::path dir = scratch("persist");
  persist_draws(draws, dir);

  SUBCASE("load returns the same draws") {
    const ChainDraws back = load_draws(dir);
    CHECK(back.info.seed == draws.info.seed);
    CHECK(back.info.stream_id == draws.info.stream_id);
    CHECK(back.info.data_hash == draws.info.data_hash);
    CHECK(back.info.paper_literal);
    CHECK(back.info.labels == draws.info.labels);
    CHECK(back.info.sample_sizes == draws.info.sample_sizes);
    CHECK(back.info.config == draws.info.config);
    CHECK(back.scalars == draws.scalars);
    REQUIRE(back.clusters.size() == draws.clusters.size());
    for (std::size_t b = 0; b < draws.clusters.size(); ++b) {
      const ClusterDraw& x = draws.clusters[b];
      const ClusterDraw& y = back.clusters[b];
      CHECK(x.perturbed == y.perturbed);
      CHECK(x.pi == y.pi);
      CHECK(x.z == y.z);
      for (std::size_t k = 0; k < x.mu0.size(); ++k) {
        CHECK(x.mu0[k] == y.mu0[k]);
        CHECK(x.sigma[k].matrix() == y.sigma[k].matrix());
        for (std::size_t j = 0; j < x.mu.size(); ++j) CHECK(x.mu[j][k] == y.mu[j][k]);
      }
    }
    REQUIRE(back.calibration.has_value());
    CHECK(back.calibration->draws == draws.calibration->draws);
    CHECK(back.calibration->delta_sum == draws.calibration->delta_sum);
  }
  SUBCASE("a truncated scalars file is detected") {
    std::ifstream in(dir / "scalars.jsonl");
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    in.close();
    std::ofstream out(dir / "scalars.jsonl", std::ios::trunc);
    for (std::size_t i = 0; i + 1 < lines.size(); ++i) out << lines[i] << "\n";
    out.close();
    CHECK(error_of([&] { load_draws(dir); }).find("record count mismatch") != std::string::npos);
  }
  SUBCASE("an incomplete run is refused") {
    std::ifstream in(dir / "meta.json");
    std::string meta((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto at = meta.find("\"complete\": true");
    REQUIRE(at != std::string::npos);
    meta.replace(at, 16, "\"complete\": false");
    std::ofstream(dir / "meta.json", std::ios::trunc) << meta;
    CHECK_FALSE(error_of([&] { load_draws(dir); }).empty());
  }
  fs::remove_all(dir);
}
