#include "censorsim/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "censorsim/expr.hpp"

namespace censorsim {

namespace {

// Big enough to pin probabilities to ~1e-11 / 1-1e-11, small enough that
// sigmoid stays well away from floating-point saturation.
constexpr double kDegenerateLogit = 25.0;

// log(1 + e^x) without overflow.
double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// Cholesky solve of A x = b for small dense symmetric A; false if not SPD.
bool solve_spd(std::vector<double> a, std::vector<double> b, std::size_t n,
               std::vector<double>& x) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 1e-12)) return false;
    const double l = std::sqrt(d);
    a[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / l;
    }
  }
  x = std::move(b);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) x[i] -= a[i * n + k] * x[k];
    x[i] /= a[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) x[ii] -= a[k * n + ii] * x[k];
    x[ii] /= a[ii * n + ii];
  }
  return true;
}

}  // namespace

std::string to_string(RowProvenance p) {
  switch (p) {
    case RowProvenance::kInitial: return "initial";
    case RowProvenance::kApproved: return "approved";
    case RowProvenance::kExplored: return "explored";
    case RowProvenance::kGuaranteed: return "guaranteed";
  }
  return "?";
}

RowProvenance row_provenance_from_string(const std::string& s) {
  if (s == "initial") return RowProvenance::kInitial;
  if (s == "approved") return RowProvenance::kApproved;
  if (s == "explored") return RowProvenance::kExplored;
  if (s == "guaranteed") return RowProvenance::kGuaranteed;
  throw LearnerError("unknown provenance '" + s + "'");
}

double LinearModel::score(std::span<const double> x) const {
  if (x.size() != weights.size())
    throw LearnerError("feature count mismatch: got " + std::to_string(x.size()) +
                       ", model has " + std::to_string(weights.size()));
  double s = intercept;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * x[i];
  return s;
}

double LinearModel::predict_proba(std::span<const double> x) const {
  return sigmoid(score(x));
}

int LinearModel::decide(std::span<const double> x) const {
  // Equivalent to predict_proba(x) > threshold, compared in logit space so
  // margins below sigmoid's floating-point resolution still decide strictly.
  return score(x) > logit_threshold() ? 1 : -1;
}

double LinearModel::logit_threshold() const { return logit(threshold); }

double logreg_loss(const Dataset& data, const TrainConfig& cfg,
                   std::span<const double> weights, double intercept,
                   std::vector<double>* grad) {
  const std::size_t d = weights.size();
  double loss = 0.0;
  if (grad) grad->assign(d + 1, 0.0);
  for (const auto& row : data.rows) {
    double s = intercept;
    for (std::size_t i = 0; i < d; ++i) s += weights[i] * row.x[i];
    const double ys = row.label > 0 ? s : -s;
    loss += log1pexp(-ys);
    if (grad) {
      const double y01 = row.label > 0 ? 1.0 : 0.0;
      const double r = sigmoid(s) - y01;
      for (std::size_t i = 0; i < d; ++i) (*grad)[i] += r * row.x[i];
      (*grad)[d] += r;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    loss += 0.5 * cfg.l2_lambda * weights[i] * weights[i];
    if (grad) (*grad)[i] += cfg.l2_lambda * weights[i];
  }
  return loss;
}

LinearModel fit_logreg(const Dataset& data, const TrainConfig& cfg) {
  if (data.rows.empty()) throw LearnerError("cannot fit on an empty dataset");
  if (cfg.l2_lambda < 0.0) throw LearnerError("l2_lambda must be nonnegative");
  const std::size_t d = data.feature_names.size();
  for (const auto& row : data.rows) {
    if (row.x.size() != d) throw LearnerError("ragged dataset row");
    if (row.label != -1 && row.label != 1)
      throw LearnerError("labels must be -1 or 1, got " + std::to_string(row.label));
  }

  LinearModel m;
  m.feature_names = data.feature_names;
  m.weights.assign(d, 0.0);

  const bool any_pos = std::any_of(data.rows.begin(), data.rows.end(),
                                   [](const DatasetRow& r) { return r.label == 1; });
  const bool any_neg = std::any_of(data.rows.begin(), data.rows.end(),
                                   [](const DatasetRow& r) { return r.label == -1; });
  if (!any_pos || !any_neg) {
    m.intercept = any_pos ? kDegenerateLogit : -kDegenerateLogit;
    m.degenerate = true;
    return m;
  }

  const std::size_t p = d + 1;  // weights + intercept
  std::vector<double> w(p, 0.0), grad, step, hess(p * p);
  double loss = logreg_loss(data, cfg, {w.data(), d}, w[d], &grad);

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::fabs(g));
    if (gmax <= cfg.tol) break;

    std::fill(hess.begin(), hess.end(), 0.0);
    for (const auto& row : data.rows) {
      double s = w[d];
      for (std::size_t i = 0; i < d; ++i) s += w[i] * row.x[i];
      const double pr = sigmoid(s);
      const double wt = std::max(pr * (1.0 - pr), 1e-10);
      for (std::size_t i = 0; i < p; ++i) {
        const double xi = i < d ? row.x[i] : 1.0;
        for (std::size_t j = 0; j <= i; ++j) {
          const double xj = j < d ? row.x[j] : 1.0;
          hess[i * p + j] += wt * xi * xj;
        }
      }
    }
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) hess[i * p + j] = hess[j * p + i];
    for (std::size_t i = 0; i < d; ++i) hess[i * p + i] += cfg.l2_lambda;

    if (!solve_spd(hess, grad, p, step)) {
      // Ill-conditioned normal equations: plain gradient step.
      step = grad;
      const double gnorm = std::sqrt(
          std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0));
      for (double& s : step) s /= std::max(gnorm, 1.0);
    }

    // Damped update: halve until the penalized loss does not increase.
    double scale = 1.0;
    std::vector<double> cand(p);
    for (int halvings = 0; halvings < 40; ++halvings) {
      for (std::size_t i = 0; i < p; ++i) cand[i] = w[i] - scale * step[i];
      const double cand_loss =
          logreg_loss(data, cfg, {cand.data(), d}, cand[d], nullptr);
      if (cand_loss <= loss + 1e-12) {
        w = cand;
        break;
      }
      scale *= 0.5;
    }
    loss = logreg_loss(data, cfg, {w.data(), d}, w[d], &grad);
  }

  m.weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(d));
  m.intercept = w[d];
  return m;
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw LearnerError("scores/labels size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::size_t npos = 0, nneg = 0;
  for (int l : labels) (l > 0 ? npos : nneg)++;
  if (npos == 0 || nneg == 0) return std::nullopt;

  double u = 0.0;
  std::size_t neg_below = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::size_t gp = 0, gn = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] > 0 ? gp : gn)++;
      ++j;
    }
    u += static_cast<double>(gp) * static_cast<double>(neg_below) +
         0.5 * static_cast<double>(gp) * static_cast<double>(gn);
    neg_below += gn;
    i = j;
  }
  return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

std::string model_to_text(const LinearModel& m) {
  std::ostringstream out;
  out.precision(17);
  out << "intercept=" << m.intercept << "\n";
  out << "threshold=" << m.threshold << "\n";
  out << "trained_at=" << m.trained_at << "\n";
  out << "degenerate=" << (m.degenerate ? 1 : 0) << "\n";
  for (std::size_t i = 0; i < m.feature_names.size(); ++i)
    out << "w." << m.feature_names[i] << "=" << m.weights[i] << "\n";
  return out.str();
}

LinearModel model_from_text(const std::string& text) {
  LinearModel m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw LearnerError("bad model line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "intercept") m.intercept = std::stod(val);
    else if (key == "threshold") m.threshold = std::stod(val);
    else if (key == "trained_at") m.trained_at = std::stoi(val);
    else if (key == "degenerate") m.degenerate = std::stoi(val) != 0;
    else if (key.rfind("w.", 0) == 0) {
      m.feature_names.push_back(key.substr(2));
      m.weights.push_back(std::stod(val));
    } else {
      throw LearnerError("bad model key: " + key);
    }
  }
  return m;
}

}  // namespace censorsim
