#include "relkit/art_anova.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "relkit/error.hpp"
#include "relkit/ranking.hpp"
#include "relkit/special_functions.hpp"

namespace relkit {
namespace {

struct Columns {
  std::vector<Eigen::Index> a, b, ab;
};

// Effect coding: level l < L-1 gets its own column, the last level is -1 in
// every column of that factor.
double effect_code(int level, int column, int levels) {
  if (level == column) return 1.0;
  if (level == levels - 1) return -1.0;
  return 0.0;
}

Eigen::MatrixXd design_matrix(const TwoWayDesign& d, Columns& cols) {
  const int ca = d.levels_a - 1;
  const int cb = d.levels_b - 1;
  const Eigen::Index p = 1 + ca + cb + ca * cb;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d.size()), p);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto ia = d.a[static_cast<std::size_t>(i)];
    const auto ib = d.b[static_cast<std::size_t>(i)];
    Eigen::Index c = 0;
    x(i, c++) = 1.0;
    for (int j = 0; j < ca; ++j) x(i, c++) = effect_code(ia, j, d.levels_a);
    for (int j = 0; j < cb; ++j) x(i, c++) = effect_code(ib, j, d.levels_b);
    for (int j = 0; j < ca; ++j) {
      for (int k = 0; k < cb; ++k) {
        x(i, c++) = effect_code(ia, j, d.levels_a) * effect_code(ib, k, d.levels_b);
      }
    }
  }
  Eigen::Index c = 1;
  for (int j = 0; j < ca; ++j) cols.a.push_back(c++);
  for (int j = 0; j < cb; ++j) cols.b.push_back(c++);
  for (int j = 0; j < ca * cb; ++j) cols.ab.push_back(c++);
  return x;
}

Eigen::VectorXd fitted(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return x * x.colPivHouseholderQr().solve(y);
}

Eigen::MatrixXd drop_columns(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& drop) {
  Eigen::MatrixXd out(x.rows(), x.cols() - static_cast<Eigen::Index>(drop.size()));
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (std::find(drop.begin(), drop.end(), j) != drop.end()) continue;
    out.col(c++) = x.col(j);
  }
  return out;
}

struct CellMeans {
  std::vector<double> cell;  // levels_a * levels_b, row-major by a
  std::vector<double> a;
  std::vector<double> b;
  double grand = 0.0;
};

CellMeans cell_means(std::span<const double> y, const TwoWayDesign& d) {
  CellMeans m;
  const auto la = static_cast<std::size_t>(d.levels_a);
  const auto lb = static_cast<std::size_t>(d.levels_b);
  std::vector<double> cs(la * lb, 0.0), as(la, 0.0), bs(lb, 0.0);
  std::vector<std::size_t> cn(la * lb, 0), an(la, 0), bn(lb, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto ia = static_cast<std::size_t>(d.a[i]);
    const auto ib = static_cast<std::size_t>(d.b[i]);
    cs[ia * lb + ib] += y[i];
    ++cn[ia * lb + ib];
    as[ia] += y[i];
    ++an[ia];
    bs[ib] += y[i];
    ++bn[ib];
    m.grand += y[i];
  }
  m.grand /= static_cast<double>(y.size());
  m.cell.resize(la * lb);
  for (std::size_t c = 0; c < cs.size(); ++c) m.cell[c] = cs[c] / static_cast<double>(cn[c]);
  m.a.resize(la);
  for (std::size_t c = 0; c < la; ++c) m.a[c] = as[c] / static_cast<double>(an[c]);
  m.b.resize(lb);
  for (std::size_t c = 0; c < lb; ++c) m.b[c] = bs[c] / static_cast<double>(bn[c]);
  return m;
}

}  // namespace

void TwoWayDesign::validate() const {
  if (a.size() != b.size()) throw DataError("factor vectors differ in length");
  if (levels_a < 2 || levels_b < 2) throw DataError("each factor needs at least two levels");
  std::vector<std::size_t> counts(static_cast<std::size_t>(levels_a * levels_b), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || a[i] >= levels_a || b[i] < 0 || b[i] >= levels_b)
      throw DataError("factor level out of range");
    ++counts[static_cast<std::size_t>(a[i] * levels_b + b[i])];
  }
  for (auto c : counts) {
    if (c == 0) throw DataError("empty cell in two-way design");
  }
  if (a.size() <= counts.size()) throw DataError("no residual degrees of freedom (single-observation cells)");
}

const TestResult& TwoWayAnova::get(ArtEffect e) const {
  switch (e) {
    case ArtEffect::kA: return effect_a;
    case ArtEffect::kB: return effect_b;
    case ArtEffect::kInteraction: return interaction;
  }
  return interaction;
}

TwoWayAnova factorial_anova(std::span<const double> y, const TwoWayDesign& design) {
  design.validate();
  if (y.size() != design.size()) throw DataError("response length does not match design");
  Columns cols;
  const Eigen::MatrixXd x = design_matrix(design, cols);
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::VectorXd full = fitted(x, yv);
  const double rss = (yv - full).squaredNorm();
  const double df_resid = static_cast<double>(x.rows() - x.cols());
  const double mse = rss / df_resid;
  if (!(mse > 0.0)) throw NumericError("two-way ANOVA: zero residual variance");

  auto test = [&](const std::vector<Eigen::Index>& drop) {
    const Eigen::VectorXd reduced = fitted(drop_columns(x, drop), yv);
    const double ss = (full - reduced).squaredNorm();
    TestResult r;
    r.method = TestMethod::kArtAnovaEffect;
    r.df1 = static_cast<double>(drop.size());
    r.df2 = df_resid;
    r.statistic = (ss / r.df1) / mse;
    r.p_value = special::f_sf(r.statistic, r.df1, r.df2);
    r.n_per_group = {design.size()};
    return r;
  };
  TwoWayAnova out;
  out.effect_a = test(cols.a);
  out.effect_b = test(cols.b);
  out.interaction = test(cols.ab);
  out.effect_a.group_labels = {"A"};
  out.effect_b.group_labels = {"B"};
  out.interaction.group_labels = {"AxB"};
  return out;
}

std::vector<double> align_responses(std::span<const double> y, const TwoWayDesign& design,
                                    ArtEffect effect) {
  design.validate();
  const auto m = cell_means(y, design);
  const auto lb = static_cast<std::size_t>(design.levels_b);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto ia = static_cast<std::size_t>(design.a[i]);
    const auto ib = static_cast<std::size_t>(design.b[i]);
    const double cell = m.cell[ia * lb + ib];
    double estimate = 0.0;
    switch (effect) {
      case ArtEffect::kA: estimate = m.a[ia] - m.grand; break;
      case ArtEffect::kB: estimate = m.b[ib] - m.grand; break;
      case ArtEffect::kInteraction: estimate = cell - m.a[ia] - m.b[ib] + m.grand; break;
    }
    out[i] = (y[i] - cell) + estimate;
  }
  return out;
}

TwoWayAnova art_anova_2x(std::span<const double> y, const TwoWayDesign& design) {
  TwoWayAnova out;
  for (auto effect : {ArtEffect::kA, ArtEffect::kB, ArtEffect::kInteraction}) {
    const auto aligned = align_responses(y, design, effect);
    const auto ranks = average_ranks(aligned).ranks;
    const auto table = factorial_anova(ranks, design);
    switch (effect) {
      case ArtEffect::kA: out.effect_a = table.effect_a; break;
      case ArtEffect::kB: out.effect_b = table.effect_b; break;
      case ArtEffect::kInteraction: out.interaction = table.interaction; break;
    }
  }
  return out;
}

}  // namespace relkit
