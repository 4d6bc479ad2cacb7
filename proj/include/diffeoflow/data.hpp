#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffeoflow/manifold.hpp"
#include "diffeoflow/matrix.hpp"
#include "diffeoflow/rng.hpp"

namespace diffeoflow {

// A labeled collection of manifold-valued matrices, the carrier of the
// target distribution. All matrices share one manifold tag and dimension.
struct LabeledDataset {
  Manifold manifold = Manifold::Spd;
  int d = 0;
  std::vector<SymMatrix> matrices;
  std::vector<int> labels;
  std::vector<std::string> subject_ids;

  std::size_t size() const { return matrices.size(); }

  std::vector<int> class_set() const {
    std::set<int> s(labels.begin(), labels.end());
    return {s.begin(), s.end()};
  }

  void validate() const {
    if (matrices.size() != labels.size() || matrices.size() != subject_ids.size())
      throw InvalidDataset("dataset arrays have mismatched lengths");
    for (const SymMatrix& m : matrices) {
      if (m.dim() != d) throw InvalidDataset("matrix dimension does not match dataset");
      if (!satisfies_manifold(m, manifold))
        throw InvalidDataset("matrix violates " + to_string(manifold) + " invariants");
    }
  }
};

namespace detail {

inline void write_f64_le(std::ofstream& out, const double* values, std::size_t count) {
  static_assert(sizeof(double) == 8);
  // Little-endian hosts write directly; this library targets such platforms.
  out.write(reinterpret_cast<const char*>(values), static_cast<std::streamsize>(count * 8));
}

}  // namespace detail

// Writes a dataset directory: manifest.json plus matrices.f64, the latter a
// flat little-endian float64 payload of n*d*d values, each matrix row-major,
// matrices concatenated in index order.
inline void write_dataset(const LabeledDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);

  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["manifold"] = to_string(ds.manifold);
  manifest["d"] = ds.d;
  manifest["n"] = ds.size();
  manifest["labels"] = ds.labels;
  manifest["subject_ids"] = ds.subject_ids;
  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw FormatError("cannot open manifest for writing: " + (dir / "manifest.json").string());
  mf << manifest.dump(2) << "\n";

  std::ofstream bf(dir / "matrices.f64", std::ios::binary);
  if (!bf) throw FormatError("cannot open matrix payload for writing");
  for (const SymMatrix& m : ds.matrices)
    detail::write_f64_le(bf, m.matrix().data(), m.matrix().size());
}

inline LabeledDataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw FormatError("missing manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt manifest: ") + e.what());
  }

  LabeledDataset ds;
  try {
    if (manifest.at("version").get<int>() != 1) throw FormatError("unsupported dataset version");
    ds.manifold = manifold_from_string(manifest.at("manifold").get<std::string>());
    ds.d = manifest.at("d").get<int>();
    ds.labels = manifest.at("labels").get<std::vector<int>>();
    ds.subject_ids = manifest.at("subject_ids").get<std::vector<std::string>>();
    const std::size_t n = manifest.at("n").get<std::size_t>();
    if (ds.labels.size() != n || ds.subject_ids.size() != n)
      throw FormatError("manifest arrays inconsistent with n");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt manifest: ") + e.what());
  }

  std::ifstream bf(dir / "matrices.f64", std::ios::binary);
  if (!bf) throw FormatError("missing matrices.f64 in " + dir.string());
  bf.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(bf.tellg());
  bf.seekg(0, std::ios::beg);
  const std::size_t expected =
      ds.labels.size() * static_cast<std::size_t>(ds.d) * static_cast<std::size_t>(ds.d) * 8;
  if (bytes != expected)
    throw FormatError("matrices.f64 has " + std::to_string(bytes) + " bytes, expected " +
                      std::to_string(expected));

  ds.matrices.reserve(ds.labels.size());
  std::vector<double> buf(static_cast<std::size_t>(ds.d) * ds.d);
  for (std::size_t k = 0; k < ds.labels.size(); ++k) {
    bf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
    Matrix m(ds.d, ds.d);
    std::copy(buf.begin(), buf.end(), m.data());
    ds.matrices.emplace_back(m);
  }
  ds.validate();
  return ds;
}

// Desk-scale ground truth: a wrapped Gaussian per class. Samples z from
// N(mean_y, sigma^2 I) in E and maps through phi^{-1}, so every output is
// manifold-valid by construction.
struct SyntheticSpec {
  Manifold manifold = Manifold::Corr;
  int d = 4;
  int num_classes = 2;
  int per_class = 100;
  std::vector<Vec> class_means;  // one vector of dim(E) per class
  double sigma = 0.3;
  std::uint64_t seed = 0;

  void check() const {
    if (!(sigma > 0.0)) throw InvalidInput("SyntheticSpec: sigma must be positive");
    if (num_classes < 1 || per_class < 1 || d < 2) throw InvalidInput("SyntheticSpec: bad sizes");
    if (static_cast<int>(class_means.size()) != num_classes)
      throw InvalidInput("SyntheticSpec: one mean per class required");
    for (const Vec& mu : class_means)
      if (static_cast<int>(mu.size()) != embedded_dim(manifold, d))
        throw InvalidInput("SyntheticSpec: class mean has wrong embedded dimension");
  }
};

// Evenly spaced class means along the normalized all-ones direction of E,
// consecutive means `separation` apart.
inline std::vector<Vec> equispaced_class_means(Manifold m, int d, int num_classes,
                                               double separation) {
  const int de = embedded_dim(m, d);
  const double u = 1.0 / std::sqrt(static_cast<double>(de));
  std::vector<Vec> means;
  for (int k = 0; k < num_classes; ++k)
    means.push_back(Vec(static_cast<std::size_t>(de), u * separation * k));
  return means;
}

inline LabeledDataset synth_generate(const SyntheticSpec& spec) {
  spec.check();
  LabeledDataset ds;
  ds.manifold = spec.manifold;
  ds.d = spec.d;
  const int de = embedded_dim(spec.manifold, spec.d);
  int index = 0;
  for (int y = 0; y < spec.num_classes; ++y) {
    Rng rng(spec.seed, 0x73796e00ULL + static_cast<std::uint64_t>(y));
    for (int i = 0; i < spec.per_class; ++i, ++index) {
      Vec z(static_cast<std::size_t>(de));
      for (int k = 0; k < de; ++k)
        z[static_cast<std::size_t>(k)] =
            spec.class_means[static_cast<std::size_t>(y)][static_cast<std::size_t>(k)] +
            spec.sigma * rng.normal();
      ds.matrices.push_back(unembed(EmbeddedVec{spec.manifold, spec.d, std::move(z)}));
      ds.labels.push_back(y);
      ds.subject_ids.push_back("synth-" + std::to_string(index));
    }
  }
  return ds;
}

// Splits at subject granularity: a subject's scans land entirely in train or
// entirely in test. The number of test subjects is the rounded fraction of
// the subject count, clamped so both sides stay nonempty.
inline std::pair<LabeledDataset, LabeledDataset> grouped_split(const LabeledDataset& ds,
                                                               double test_fraction,
                                                               std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidInput("grouped_split: test_fraction must be in (0, 1)");
  std::vector<std::string> subjects;
  {
    std::set<std::string> seen;
    for (const std::string& s : ds.subject_ids)
      if (seen.insert(s).second) subjects.push_back(s);
  }
  if (subjects.size() < 2) throw CannotSplit("grouped_split: need at least two subjects");

  Rng rng(seed, 0x73706c69ULL);
  shuffle(subjects, rng);
  std::size_t num_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(subjects.size())));
  num_test = std::max<std::size_t>(1, std::min(subjects.size() - 1, num_test));

  std::set<std::string> test_subjects(subjects.begin(),
                                      subjects.begin() + static_cast<std::ptrdiff_t>(num_test));
  LabeledDataset train, test;
  train.manifold = test.manifold = ds.manifold;
  train.d = test.d = ds.d;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    LabeledDataset& dst = test_subjects.count(ds.subject_ids[i]) ? test : train;
    dst.matrices.push_back(ds.matrices[i]);
    dst.labels.push_back(ds.labels[i]);
    dst.subject_ids.push_back(ds.subject_ids[i]);
  }
  return {std::move(train), std::move(test)};
}

// Oracle-approximating shrinkage covariance from a T x d time-series matrix
// (rows are time points). S is the mean-removed sample covariance with
// divisor T; the shrinkage weight is
//   rho* = min(1, [(1 - 2/d) tr(S^2) + tr(S)^2] /
//                 [(T + 1 - 2/d) (tr(S^2) - tr(S)^2 / d)])
// and the estimate is (1 - rho*) S + rho* (tr(S)/d) I.
inline SpdMatrix oas_covariance(const Matrix& x) {
  const int t_len = x.rows();
  const int d = x.cols();
  if (t_len < 2 || d < 1) throw InvalidInput("oas_covariance: need T >= 2 and d >= 1");
  if (!x.all_finite()) throw InvalidInput("oas_covariance: non-finite input");

  Vec mean(static_cast<std::size_t>(d), 0.0);
  for (int t = 0; t < t_len; ++t)
    for (int j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += x(t, j);
  for (double& v : mean) v /= static_cast<double>(t_len);

  SymMatrix s(d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      double acc = 0.0;
      for (int t = 0; t < t_len; ++t)
        acc += (x(t, i) - mean[static_cast<std::size_t>(i)]) *
               (x(t, j) - mean[static_cast<std::size_t>(j)]);
      s.set(i, j, acc / static_cast<double>(t_len));
    }

  const double tr_s = s.matrix().trace();
  double tr_s2 = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) tr_s2 += s(i, j) * s(j, i);

  const double dd = static_cast<double>(d);
  const double numer = (1.0 - 2.0 / dd) * tr_s2 + tr_s * tr_s;
  const double denom = (static_cast<double>(t_len) + 1.0 - 2.0 / dd) * (tr_s2 - tr_s * tr_s / dd);
  const double rho = denom > 0.0 ? std::min(1.0, numer / denom) : 1.0;

  const double mu = tr_s / dd;
  SymMatrix out(d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j)
      out.set(i, j, (1.0 - rho) * s(i, j) + (i == j ? rho * mu : 0.0));
  return SpdMatrix(out);
}

// Correlation estimate: z-score each column, run OAS, then normalize the
// result to an exact unit diagonal.
inline CorrMatrix corr_from_timeseries(const Matrix& x) {
  const int t_len = x.rows();
  const int d = x.cols();
  if (t_len < 2 || d < 1) throw InvalidInput("corr_from_timeseries: need T >= 2 and d >= 1");
  Matrix z(t_len, d);
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int t = 0; t < t_len; ++t) mean += x(t, j);
    mean /= static_cast<double>(t_len);
    double var = 0.0;
    for (int t = 0; t < t_len; ++t) var += (x(t, j) - mean) * (x(t, j) - mean);
    var /= static_cast<double>(t_len);
    if (!(var > 0.0))
      throw DegenerateChannel("corr_from_timeseries: constant column " + std::to_string(j));
    const double inv_sd = 1.0 / std::sqrt(var);
    for (int t = 0; t < t_len; ++t) z(t, j) = (x(t, j) - mean) * inv_sd;
  }
  const SpdMatrix cov = oas_covariance(z);
  Vec inv_sqrt(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) inv_sqrt[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(cov(i, i));
  SymMatrix out(d);
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j)
      out.set(i, j, cov(i, j) * inv_sqrt[static_cast<std::size_t>(i)] *
                        inv_sqrt[static_cast<std::size_t>(j)]);
    out.set(i, i, 1.0);
  }
  return CorrMatrix(out);
}

// Reads a single matrix from a CSV file, one row per line, comma-separated.
// Convenience import for hand-authored fixtures.
inline Matrix read_csv_matrix(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open " + file.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError("bad CSV value '" + cell + "' in " + file.string());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError("ragged CSV rows in " + file.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("empty CSV file " + file.string());
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return m;
}

}  // namespace diffeoflow
