#include "cremid/draws.hpp"

#include <bit>
#include <cstdio>

#include "cremid/errors.hpp"

namespace cremid {

void CalibrationAccumulator::add(const ModelState& state) {
  const auto& labels = state.assign.labels();
  const int J = static_cast<int>(labels.size());
  const int p = static_cast<int>(state.globals.m1.size());
  if (delta_sum.empty()) {
    for (int j = 0; j < J; ++j) delta_sum.push_back(Matrix::Zero(static_cast<Eigen::Index>(labels[j].size()), p));
  }
  for (int j = 0; j < J; ++j) {
    for (std::size_t i = 0; i < labels[j].size(); ++i) {
      const int k = labels[j][i];
      if (!state.kernels.perturbed[k]) continue;
      delta_sum[j].row(static_cast<Eigen::Index>(i)) += (state.kernels.mu[j][k] - state.kernels.mu0[k]).transpose();
    }
  }
  ++draws;
}

std::vector<Matrix> CalibrationAccumulator::mean_delta() const {
  std::vector<Matrix> out;
  for (const Matrix& m : delta_sum) out.push_back(draws > 0 ? Matrix(m / static_cast<double>(draws)) : m);
  return out;
}

std::string dataset_hash(const MultiSampleDataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(data.dim));
  for (int j = 0; j < data.num_samples(); ++j) {
    if (j < static_cast<int>(data.labels.size()))
      for (char c : data.labels[j]) mix(static_cast<unsigned char>(c));
    mix(static_cast<std::uint64_t>(data.size(j)));
    const Matrix& s = data.samples[j];
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index d = 0; d < s.cols(); ++d) mix(std::bit_cast<std::uint64_t>(s(i, d)));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ChainDraws merge_chains(const std::vector<ChainDraws>& chains) {
  if (chains.empty()) throw ValidationError("no chains to merge");
  ChainDraws out;
  out.info = chains.front().info;
  bool all_calibrated = true;
  for (const ChainDraws& c : chains) {
    if (c.info.data_hash != out.info.data_hash || c.info.K0 != out.info.K0 || c.info.K1 != out.info.K1) {
      throw ValidationError("chains were fit to different data or truncations");
    }
    out.scalars.insert(out.scalars.end(), c.scalars.begin(), c.scalars.end());
    out.clusters.insert(out.clusters.end(), c.clusters.begin(), c.clusters.end());
    all_calibrated = all_calibrated && c.calibration.has_value();
  }
  if (all_calibrated) {
    CalibrationAccumulator acc = *chains.front().calibration;
    for (std::size_t c = 1; c < chains.size(); ++c) {
      const CalibrationAccumulator& other = *chains[c].calibration;
      acc.draws += other.draws;
      for (std::size_t j = 0; j < acc.delta_sum.size(); ++j) acc.delta_sum[j] += other.delta_sum[j];
    }
    out.calibration = std::move(acc);
  }
  return out;
}

}  // namespace cremid
