#include "ecm/vote_transfer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "ecm/samplers.hpp"

namespace ecm::vote {

namespace {

constexpr double kNegInfV = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLogitBound = 12.0;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    // Trim surrounding whitespace; ids with embedded commas are not
    // supported by this format.
    const auto b = cur.find_first_not_of(" \t\r");
    const auto e = cur.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string()
                                            : cur.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::int64_t parse_count(const std::string& s, int line_no) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line_no) +
                             ": not an integer: '" + s + "'");
  }
  if (used != s.size())
    throw std::runtime_error("line " + std::to_string(line_no) +
                             ": trailing characters in '" + s + "'");
  if (v < 0)
    throw std::runtime_error("line " + std::to_string(line_no) +
                             ": negative count");
  return v;
}

}  // namespace

std::int64_t DistrictData::voters() const {
  std::int64_t n = 0;
  for (std::int64_t q : first_round) n += q;
  return n;
}

void DistrictData::validate() const {
  require(!id.empty(), "district: empty id");
  require(!first_round.empty(), "district: no first-round options");
  for (std::int64_t q : first_round) require(q >= 0, "district: negative count");
  for (std::int64_t q : second_round) require(q >= 0, "district: negative count");
  const std::int64_t n2 =
      second_round[0] + second_round[1] + second_round[2];
  require(voters() == n2, "district: rounds sum to different totals");
}

LoadReport load_districts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty file");
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 5 || header.front() != "district")
    throw std::runtime_error(path + ": bad header (want district,opt_1..opt_m,res_1,res_2,res_3)");
  const int m1 = static_cast<int>(header.size()) - 4;
  for (int i = 0; i < m1; ++i)
    if (header[1 + i] != "opt_" + std::to_string(i + 1))
      throw std::runtime_error(path + ": bad header column " +
                               std::to_string(i + 2));
  for (int i = 0; i < 3; ++i)
    if (header[1 + m1 + i] != "res_" + std::to_string(i + 1))
      throw std::runtime_error(path + ": bad header column " +
                               std::to_string(m1 + 2 + i));

  LoadReport report;
  report.m1 = m1;
  std::unordered_set<std::string> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != m1 + 4)
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": expected " + std::to_string(m1 + 4) +
                               " columns, got " +
                               std::to_string(fields.size()));
    DistrictData d;
    d.id = fields[0];
    if (d.id.empty())
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": empty district id");
    if (!seen.insert(d.id).second)
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": duplicate district id '" + d.id + "'");
    d.first_round.resize(m1);
    for (int i = 0; i < m1; ++i)
      d.first_round[i] = parse_count(fields[1 + i], line_no);
    for (int i = 0; i < 3; ++i)
      d.second_round[i] = parse_count(fields[1 + m1 + i], line_no);

    const std::int64_t n2 =
        d.second_round[0] + d.second_round[1] + d.second_round[2];
    if (d.voters() != n2) {
      report.rejected.push_back(
          {line_no, d.id,
           "rounds sum to " + std::to_string(d.voters()) + " vs " +
               std::to_string(n2)});
      continue;
    }
    report.districts.push_back(std::move(d));
  }
  if (report.districts.empty())
    throw std::runtime_error(path + ": no usable district rows");
  return report;
}

void TransitionMatrix::validate(double tol) const {
  require(p.cols() == 3, "transition matrix: need 3 destination columns");
  require(p.rows() >= 1, "transition matrix: need at least one row");
  for (Eigen::Index l = 0; l < p.rows(); ++l) {
    double row = 0.0;
    for (Eigen::Index c = 0; c < 3; ++c) {
      require(std::isfinite(p(l, c)) && p(l, c) >= 0.0 && p(l, c) <= 1.0,
              "transition matrix: entries must be probabilities");
      row += p(l, c);
    }
    require(std::fabs(row - 1.0) <= tol,
            "transition matrix: row must sum to 1");
  }
}

ConditionalMoments district_conditional_moments(const DistrictData& d,
                                                const TransitionMatrix& T) {
  require(static_cast<Eigen::Index>(d.first_round.size()) == T.p.rows(),
          "district/matrix shape mismatch");
  ConditionalMoments out;
  out.mean.setZero();
  out.cov.setZero();
  for (Eigen::Index l = 0; l < T.p.rows(); ++l) {
    const double q = static_cast<double>(d.first_round[l]);
    if (q == 0.0) continue;
    for (int c = 0; c < 3; ++c) {
      const double plc = T.p(l, c);
      out.mean[c] += q * plc;
      for (int c2 = 0; c2 < 3; ++c2)
        out.cov(c, c2) += q * ((c == c2 ? plc : 0.0) - plc * T.p(l, c2));
    }
  }
  return out;
}

namespace {

// 2x2 log-density of the two candidate counts; abstention is the
// complement and carries no extra information.
double district_term(const DistrictData& d, const ConditionalMoments& mom,
                     bool* skipped) {
  *skipped = false;
  Eigen::Vector2d r(static_cast<double>(d.second_round[0]) - mom.mean[0],
                    static_cast<double>(d.second_round[1]) - mom.mean[1]);
  Eigen::Matrix2d cov = mom.cov.topLeftCorner<2, 2>();
  cov = 0.5 * (cov + cov.transpose()).eval();
  const double unit = cov.trace() / 2.0;
  if (unit <= 0.0) {
    // Deterministic transfer: the observation either matches the mean
    // exactly or is impossible.
    return (std::fabs(r[0]) < 1e-9 && std::fabs(r[1]) < 1e-9) ? 0.0
                                                              : kNegInfV;
  }
  Eigen::LLT<Eigen::Matrix2d> llt;
  bool ok = false;
  for (double jitter = 0.0;;) {
    Eigen::Matrix2d work = cov;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    llt.compute(work);
    if (llt.info() == Eigen::Success) {
      ok = true;
      break;
    }
    jitter = jitter == 0.0 ? 1e-10 * unit : jitter * 10.0;
    if (!(jitter > 0.0) || jitter > 1e-6 * unit * 1.0000001) break;
  }
  if (!ok) {
    *skipped = true;
    return 0.0;
  }
  const Eigen::Matrix2d& L = llt.matrixLLT();
  const double logdet = 2.0 * (std::log(L(0, 0)) + std::log(L(1, 1)));
  const double quad = r.dot(llt.solve(r));
  const double out = -0.5 * (2.0 * kLog2Pi + logdet + quad);
  return std::isfinite(out) ? out : kNegInfV;
}

}  // namespace

double transfer_loglik(const std::vector<DistrictData>& districts,
                       const TransitionMatrix& T, int* n_skipped) {
  T.validate(1e-9);
  require(!districts.empty(), "no districts");
  double total = 0.0;
  int skipped = 0;
  for (const DistrictData& d : districts) {
    bool skip = false;
    const double term =
        district_term(d, district_conditional_moments(d, T), &skip);
    if (skip) {
      ++skipped;
      continue;
    }
    total += term;
    if (total == kNegInfV) break;
  }
  if (n_skipped != nullptr) *n_skipped = skipped;
  return total;
}

namespace {

// Rows via multinomial logit with abstention (column 3) as reference.
Eigen::MatrixXd logits_to_matrix(const Eigen::VectorXd& logits, int m1) {
  Eigen::MatrixXd T(m1, 3);
  for (int l = 0; l < m1; ++l) {
    const double a = logits[2 * l];
    const double b = logits[2 * l + 1];
    // Subtract the max before exponentiating for overflow safety.
    const double mx = std::max({a, b, 0.0});
    const double ea = std::exp(a - mx);
    const double eb = std::exp(b - mx);
    const double er = std::exp(-mx);
    const double denom = ea + eb + er;
    T(l, 0) = ea / denom;
    T(l, 1) = eb / denom;
    T(l, 2) = er / denom;
    // Make the row sum exactly 1.
    const double s = T(l, 0) + T(l, 1) + T(l, 2);
    T.row(l) /= s;
  }
  return T;
}

}  // namespace

TransferFitResult fit_transfer(const std::vector<DistrictData>& districts,
                               int n_starts, std::uint64_t seed,
                               const opt::MinimizeOptions& opts) {
  require(districts.size() >= 2, "need at least two districts");
  require(n_starts >= 1, "need at least one start");
  const int m1 = static_cast<int>(districts.front().first_round.size());
  for (const DistrictData& d : districts) {
    d.validate();
    require(static_cast<int>(d.first_round.size()) == m1,
            "districts disagree on the option count");
  }
  const int dim = 2 * m1;

  auto objective = [&](const Eigen::VectorXd& logits) {
    TransitionMatrix T{logits_to_matrix(logits, m1)};
    const double ll = transfer_loglik(districts, T, nullptr);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };

  opt::Box box{Eigen::VectorXd::Constant(dim, -kLogitBound),
               Eigen::VectorXd::Constant(dim, kLogitBound)};

  TransferFitResult res;
  int best = -1;
  int total_evals = 0;
  RngStream start_rng = RngStream::derive(seed, {0x57A7});
  for (int si = 0; si < n_starts; ++si) {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(dim);
    if (si > 0)
      for (int i = 0; i < dim; ++i) x0[i] = start_rng.uniform(-2.0, 2.0);
    opt::MinimizeResult run = opt::minimize_box(objective, x0, box, opts);
    total_evals += run.evaluations;
    if (std::isfinite(run.f) && (best < 0 || run.f < res.starts[best].f))
      best = si;
    res.starts.push_back(std::move(run));
  }
  if (best < 0)
    throw std::runtime_error("fit_transfer: no start reached a finite objective");

  const opt::MinimizeResult& win = res.starts[best];
  res.winner_start = best;
  res.logits = win.x;
  res.loglik = -win.f;
  res.iterations = win.iterations;
  res.matrix.p = logits_to_matrix(win.x, m1);
  res.matrix.validate();
  transfer_loglik(districts, res.matrix, &res.skipped_districts);

  res.hessian = opt::fd_hessian(objective, win.x, infer::kHessianRelStep,
                                &total_evals);
  res.evaluations = total_evals;
  if (res.hessian.allFinite()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.hessian);
    res.min_hessian_eigenvalue = es.eigenvalues().minCoeff();
  } else {
    res.min_hessian_eigenvalue = kNegInfV;
  }
  res.erratic = res.min_hessian_eigenvalue < infer::kErraticEigThreshold;
  return res;
}

infer::BootstrapResult transfer_bootstrap(
    const TransferFitResult& fitted,
    const std::vector<DistrictData>& districts, int n, std::uint64_t seed,
    int n_starts, int jobs, const opt::MinimizeOptions& opts) {
  require(n >= 0, "bootstrap size must be >= 0");
  require(jobs >= 1, "jobs must be >= 1");
  require(!fitted.erratic, "bootstrap requires a non-erratic fit");
  fitted.matrix.validate();

  const int m1 = static_cast<int>(fitted.matrix.p.rows());
  const int width = 3 * m1;
  infer::BootstrapResult out;
  out.n_requested = n;
  out.samples.resize(0, width);
  out.ci_lower = Eigen::VectorXd::Constant(width, std::nan(""));
  out.ci_upper = Eigen::VectorXd::Constant(width, std::nan(""));
  if (n == 0) return out;

  const int pool = static_cast<int>(std::ceil(n * 1.045));
  struct Rep {
    bool ok = false;
    Eigen::VectorXd entries;
  };
  std::vector<Rep> reps(pool);

  auto run_one = [&](int r) {
    RngStream stream =
        RngStream::derive(seed, {0xB07E, static_cast<std::uint64_t>(r)});
    std::vector<DistrictData> synth = districts;
    for (DistrictData& d : synth) {
      std::vector<std::int64_t> drawn =
          sample_conditional_next(d.first_round, fitted.matrix.p, stream);
      for (int c = 0; c < 3; ++c) d.second_round[c] = drawn[c];
    }
    try {
      TransferFitResult rf =
          fit_transfer(synth, n_starts, stream.next_u64(), opts);
      if (!rf.erratic) {
        reps[r].ok = true;
        reps[r].entries.resize(width);
        for (int l = 0; l < m1; ++l)
          for (int c = 0; c < 3; ++c)
            reps[r].entries[3 * l + c] = rf.matrix.p(l, c);
      }
    } catch (const std::exception&) {
    }
  };

  if (jobs == 1) {
    for (int r = 0; r < pool; ++r) run_one(r);
  } else {
    std::vector<std::thread> workers;
    std::atomic<int> next{0};
    for (int w = 0; w < jobs; ++w)
      workers.emplace_back([&]() {
        for (int r = next.fetch_add(1); r < pool; r = next.fetch_add(1))
          run_one(r);
      });
    for (auto& t : workers) t.join();
  }

  std::vector<const Eigen::VectorXd*> kept;
  for (const Rep& rep : reps) {
    if (rep.ok) kept.push_back(&rep.entries);
    if (static_cast<int>(kept.size()) == n) break;
  }
  out.n_retained = static_cast<int>(kept.size());
  out.low_retention = out.n_retained < (n + 1) / 2;
  out.samples.resize(out.n_retained, width);
  for (int i = 0; i < out.n_retained; ++i) out.samples.row(i) = *kept[i];
  if (out.n_retained > 0) {
    for (int j = 0; j < width; ++j) {
      std::vector<double> col(out.n_retained);
      for (int i = 0; i < out.n_retained; ++i) col[i] = out.samples(i, j);
      out.ci_lower[j] = infer::percentile(col, 2.5);
      out.ci_upper[j] = infer::percentile(col, 97.5);
    }
  }
  return out;
}

}  // namespace ecm::vote
