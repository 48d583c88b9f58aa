#include "wifidiag/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "json_io.hpp"
#include "parallel.hpp"
#include "wifidiag/errors.hpp"

namespace wifidiag::diagnosis {

namespace {

using io::json;

constexpr std::array<std::string_view, 3> kTaskNames = {"Detection", "Classification", "Localization"};
constexpr std::array<std::string_view, 4> kMethodNames = {"LogReg", "KNN", "DecisionTree", "MLP"};

void check_training_set(const Matrix& x, const std::vector<int>& y, int n_classes) {
  if (x.rows() == 0) throw TrainingError("empty training set");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw TrainingError("feature and label counts differ");
  if (n_classes < 2) throw TrainingError("need at least two classes");
  std::vector<int> count(static_cast<std::size_t>(n_classes), 0);
  for (int c : y) {
    if (c < 0 || c >= n_classes) throw TrainingError(fmt::format("label {} outside [0, {})", c, n_classes));
    ++count[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < n_classes; ++c) {
    if (count[static_cast<std::size_t>(c)] == 0) throw TrainingError(fmt::format("class {} has no training examples", c));
  }
}

Matrix one_hot(const std::vector<int>& y, int k) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(y.size()), k);
  for (std::size_t i = 0; i < y.size(); ++i) out(static_cast<Eigen::Index>(i), y[i]) = 1.0;
  return out;
}

// Row-wise softmax, shifted by the row max for stability.
Matrix softmax(const Matrix& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  Vector sums = p.rowwise().sum();
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= sums(i);
  return p;
}

std::vector<int> argmax_rows(const Matrix& s) {
  std::vector<int> out(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < s.cols(); ++j) {
      if (s(i, j) > s(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

struct Adam {
  Vector m, v;
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  int t = 0;
  Adam(Eigen::Index n, double rate) : m(Vector::Zero(n)), v(Vector::Zero(n)), lr(rate) {}
  void step(Vector& params, const Vector& grad) {
    ++t;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(b1, t);
    const double c2 = 1 - std::pow(b2, t);
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

double gini(const std::vector<int>& counts, int total) {
  if (total == 0) return 0.0;
  double s = 1.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / total;
    s -= p * p;
  }
  return s;
}

int majority(const std::vector<int>& counts) {
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

json record_json(const ResultsRecord& r) {
  return {{"method", r.method},     {"modalities", r.modalities}, {"task", r.task},     {"accuracy", r.accuracy},
          {"precision", r.precision}, {"recall", r.recall},       {"f1", r.f1},         {"n_train", r.n_train},
          {"n_test", r.n_test}};
}

}  // namespace

std::string_view to_string(Task t) { return kTaskNames[static_cast<std::size_t>(t)]; }

Task task_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kTaskNames.size(); ++i) {
    if (kTaskNames[i] == s || (s.size() == 1 && s[0] == kTaskNames[i][0])) return static_cast<Task>(i);
  }
  throw ConfigError("unknown task: '" + std::string(s) + "'");
}

char task_letter(Task t) { return kTaskNames[static_cast<std::size_t>(t)][0]; }

std::string_view to_string(Method m) { return kMethodNames[static_cast<std::size_t>(m)]; }

Method method_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kMethodNames.size(); ++i) {
    if (kMethodNames[i] == s) return static_cast<Method>(i);
  }
  throw ConfigError("unknown method: '" + std::string(s) + "'");
}

std::optional<int> label_for(const dataset::Labels& labels, Task task) {
  switch (task) {
    case Task::Detection: return labels.fault_present ? 1 : 0;
    case Task::Classification: return fault_index(labels.fault_type);
    case Task::Localization:
      if (!labels.fault_present) return std::nullopt;
      return *labels.fault_node;
  }
  return std::nullopt;
}

int class_count(Task task, int n_nodes) {
  switch (task) {
    case Task::Detection: return 2;
    case Task::Classification: return kFaultTypeCount;
    case Task::Localization: return n_nodes;
  }
  return 0;
}

std::unique_ptr<Classifier> make_classifier(Method method, const Hyper& hyper) {
  switch (method) {
    case Method::LogReg: return std::make_unique<LogReg>(hyper);
    case Method::KNN: return std::make_unique<Knn>(hyper.knn_k);
    case Method::DecisionTree: return std::make_unique<DecisionTree>(hyper.tree_max_depth, hyper.tree_min_leaf);
    case Method::MLP: return std::make_unique<Mlp>(hyper);
  }
  throw ConfigError("unknown method");
}

// ---------------------------------------------------------------------------
// LogReg

namespace {

// Per-row weights n / (k * count[class]) so every class carries equal mass.
Vector balanced_weights(const std::vector<int>& y, int n_classes) {
  std::vector<double> count(static_cast<std::size_t>(n_classes), 0.0);
  for (int c : y) count[static_cast<std::size_t>(c)] += 1.0;
  Vector w(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i)
    w[static_cast<Eigen::Index>(i)] = static_cast<double>(y.size()) / (n_classes * count[static_cast<std::size_t>(y[i])]);
  return w;
}

}  // namespace

void LogReg::fit(const Matrix& x, const std::vector<int>& y, int n_classes) {
  check_training_set(x, y, n_classes);
  const auto d = x.cols();
  const auto n = static_cast<double>(x.rows());
  const Matrix target = one_hot(y, n_classes);
  const Vector weight = balanced_weights(y, n_classes);
  Vector params = Vector::Zero(d * n_classes + n_classes);
  Adam opt(params.size(), hyper_.logreg_lr);
  for (int epoch = 0; epoch < hyper_.logreg_epochs; ++epoch) {
    Eigen::Map<const Matrix> w(params.data(), d, n_classes);
    Eigen::Map<const Vector> b(params.data() + d * n_classes, n_classes);
    Matrix logits = (x * w).rowwise() + b.transpose();
    const Matrix g = weight.asDiagonal() * (softmax(logits) - target) / n;
    Vector grad(params.size());
    Eigen::Map<Matrix>(grad.data(), d, n_classes) = x.transpose() * g + hyper_.logreg_l2 * w;
    Eigen::Map<Vector>(grad.data() + d * n_classes, n_classes) = g.colwise().sum().transpose();
    opt.step(params, grad);
  }
  w_ = Eigen::Map<const Matrix>(params.data(), d, n_classes);
  b_ = Eigen::Map<const Vector>(params.data() + d * n_classes, n_classes);
}

Matrix LogReg::scores(const Matrix& x) const {
  if (w_.size() == 0) throw ContractError("LogReg used before fit");
  if (x.cols() != w_.rows()) throw ContractError("feature dimension differs from training");
  return (x * w_).rowwise() + b_.transpose();
}

std::vector<int> LogReg::predict(const Matrix& x) const { return argmax_rows(scores(x)); }

// ---------------------------------------------------------------------------
// KNN

void Knn::fit(const Matrix& x, const std::vector<int>& y, int n_classes) {
  check_training_set(x, y, n_classes);
  if (k_ < 1) throw TrainingError("k must be >= 1");
  x_ = x;
  y_ = y;
  n_classes_ = n_classes;
}

std::vector<int> Knn::predict(const Matrix& x) const {
  if (x_.size() == 0) throw ContractError("KNN used before fit");
  if (x.cols() != x_.cols()) throw ContractError("feature dimension differs from training");
  const auto n = static_cast<std::size_t>(x_.rows());
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_), n);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (std::size_t i = 0; i < n; ++i) dist[i] = {(x_.row(static_cast<Eigen::Index>(i)) - x.row(r)).squaredNorm(), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<int> votes(static_cast<std::size_t>(n_classes_), 0);
    std::vector<double> nearest(static_cast<std::size_t>(n_classes_), std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < k; ++j) {
      const auto c = static_cast<std::size_t>(y_[dist[j].second]);
      ++votes[c];
      nearest[c] = std::min(nearest[c], dist[j].first);
    }
    int best = 0;
    for (int c = 1; c < n_classes_; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      const auto bb = static_cast<std::size_t>(best);
      if (votes[cc] > votes[bb] || (votes[cc] == votes[bb] && nearest[cc] < nearest[bb])) best = c;
    }
    out.push_back(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DecisionTree

void DecisionTree::fit(const Matrix& x, const std::vector<int>& y, int n_classes) {
  check_training_set(x, y, n_classes);
  if (max_depth_ < 1 || min_leaf_ < 1) throw TrainingError("tree depth and leaf size must be >= 1");
  n_classes_ = n_classes;
  nodes_.clear();
  std::vector<int> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  build(x, y, idx, 0);
}

int DecisionTree::build(const Matrix& x, const std::vector<int>& y, std::vector<int>& idx, int depth) {
  const int me = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  std::vector<int> counts(static_cast<std::size_t>(n_classes_), 0);
  for (int i : idx) ++counts[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])];
  nodes_[static_cast<std::size_t>(me)].label = majority(counts);
  const int total = static_cast<int>(idx.size());
  const bool pure = *std::max_element(counts.begin(), counts.end()) == total;
  if (pure || depth >= max_depth_ || total < 2 * min_leaf_) return me;

  double best_impurity = std::numeric_limits<double>::infinity();
  int best_feature = -1;
  double best_threshold = 0.0;
  std::vector<int> order = idx;
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
    std::vector<int> left(static_cast<std::size_t>(n_classes_), 0);
    std::vector<int> right = counts;
    for (int pos = 0; pos + 1 < total; ++pos) {
      const int i = order[static_cast<std::size_t>(pos)];
      const auto c = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
      ++left[c];
      --right[c];
      const double here = x(i, f);
      const double next = x(order[static_cast<std::size_t>(pos) + 1], f);
      if (!(next > here)) continue;
      const int nl = pos + 1;
      const int nr = total - nl;
      if (nl < min_leaf_ || nr < min_leaf_) continue;
      const double impurity = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
      if (impurity < best_impurity - 1e-12) {
        best_impurity = impurity;
        best_feature = static_cast<int>(f);
        best_threshold = 0.5 * (here + next);
      }
    }
  }
  if (best_feature < 0) return me;

  std::vector<int> li, ri;
  for (int i : idx) (x(i, best_feature) <= best_threshold ? li : ri).push_back(i);
  nodes_[static_cast<std::size_t>(me)].feature = best_feature;
  nodes_[static_cast<std::size_t>(me)].threshold = best_threshold;
  const int l = build(x, y, li, depth + 1);
  nodes_[static_cast<std::size_t>(me)].left = l;
  const int r = build(x, y, ri, depth + 1);
  nodes_[static_cast<std::size_t>(me)].right = r;
  return me;
}

std::vector<int> DecisionTree::predict(const Matrix& x) const {
  if (nodes_.empty()) throw ContractError("DecisionTree used before fit");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    int n = 0;
    while (nodes_[static_cast<std::size_t>(n)].feature >= 0) {
      const auto& node = nodes_[static_cast<std::size_t>(n)];
      n = x(r, node.feature) <= node.threshold ? node.left : node.right;
    }
    out.push_back(nodes_[static_cast<std::size_t>(n)].label);
  }
  return out;
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// MLP

void Mlp::init(int n_features, int n_classes) {
  d_ = n_features;
  h_ = hyper_.mlp_hidden;
  k_ = n_classes;
  params_ = Vector::Zero(static_cast<Eigen::Index>(d_) * h_ + h_ + static_cast<Eigen::Index>(h_) * k_ + k_);
  Rng rng(hyper_.seed);
  const double a1 = std::sqrt(6.0 / (d_ + h_));
  const double a2 = std::sqrt(6.0 / (h_ + k_));
  std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
  Eigen::Index p = 0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d_) * h_; ++i) params_(p++) = u1(rng);
  p += h_;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(h_) * k_; ++i) params_(p++) = u2(rng);
}

Matrix Mlp::forward(const Vector& params, const Matrix& x, Matrix* hidden) const {
  const Eigen::Index d = d_, h = h_, k = k_;
  Eigen::Map<const Matrix> w1(params.data(), d, h);
  Eigen::Map<const Vector> b1(params.data() + d * h, h);
  Eigen::Map<const Matrix> w2(params.data() + d * h + h, h, k);
  Eigen::Map<const Vector> b2(params.data() + d * h + h + h * k, k);
  Matrix hid = ((x * w1).rowwise() + b1.transpose()).array().tanh();
  Matrix logits = (hid * w2).rowwise() + b2.transpose();
  if (hidden) *hidden = std::move(hid);
  return logits;
}

double Mlp::loss_and_gradient(const Vector& params, const Matrix& x, const std::vector<int>& y, Vector* grad) const {
  if (params.size() != params_.size() || x.cols() != d_) throw ContractError("MLP shape mismatch");
  const Eigen::Index d = d_, h = h_, k = k_;
  const auto n = static_cast<double>(x.rows());
  Matrix hid;
  const Matrix p = softmax(forward(params, x, &hid));
  Eigen::Map<const Matrix> w1(params.data(), d, h);
  Eigen::Map<const Matrix> w2(params.data() + d * h + h, h, k);
  const Vector weight = balanced_weights(y, k_);
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    loss -= weight[r] * std::log(std::max(p(r, y[i]), 1e-300));
  }
  loss = loss / n + 0.5 * hyper_.mlp_l2 * (w1.squaredNorm() + w2.squaredNorm());
  if (grad) {
    const Matrix g2 = weight.asDiagonal() * (p - one_hot(y, k_)) / n;
    const Matrix dh = (g2 * w2.transpose()).array() * (1.0 - hid.array().square());
    grad->resize(params.size());
    Eigen::Map<Matrix>(grad->data(), d, h) = x.transpose() * dh + hyper_.mlp_l2 * w1;
    Eigen::Map<Vector>(grad->data() + d * h, h) = dh.colwise().sum().transpose();
    Eigen::Map<Matrix>(grad->data() + d * h + h, h, k) = hid.transpose() * g2 + hyper_.mlp_l2 * w2;
    Eigen::Map<Vector>(grad->data() + d * h + h + h * k, k) = g2.colwise().sum().transpose();
  }
  return loss;
}

void Mlp::fit(const Matrix& x, const std::vector<int>& y, int n_classes) {
  check_training_set(x, y, n_classes);
  init(static_cast<int>(x.cols()), n_classes);
  Adam opt(params_.size(), hyper_.mlp_lr);
  Vector grad;
  for (int epoch = 0; epoch < hyper_.mlp_epochs; ++epoch) {
    loss_and_gradient(params_, x, y, &grad);
    opt.step(params_, grad);
  }
}

std::vector<int> Mlp::predict(const Matrix& x) const {
  if (params_.size() == 0) throw ContractError("MLP used before fit");
  if (x.cols() != d_) throw ContractError("feature dimension differs from training");
  return argmax_rows(forward(params_, x, nullptr));
}

// ---------------------------------------------------------------------------
// Metrics

Metrics evaluate(const std::vector<int>& predicted, const std::vector<int>& truth, Task task) {
  if (predicted.size() != truth.size()) throw ContractError("prediction and label counts differ");
  Metrics m;
  if (truth.empty()) return m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());

  auto class_pr = [&](int c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (predicted[i] == c && truth[i] == c) ++tp;
      else if (predicted[i] == c) ++fp;
      else if (truth[i] == c) ++fn;
    }
    return std::pair{tp + fp > 0 ? tp / (tp + fp) : 0.0, tp + fn > 0 ? tp / (tp + fn) : 0.0};
  };
  if (task == Task::Detection) {
    std::tie(m.precision, m.recall) = class_pr(1);
  } else {
    std::set<int> classes(truth.begin(), truth.end());
    for (int c : classes) {
      auto [p, r] = class_pr(c);
      m.precision += p;
      m.recall += r;
    }
    m.precision /= static_cast<double>(classes.size());
    m.recall /= static_cast<double>(classes.size());
  }
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

std::string to_jsonl(const std::vector<ResultsRecord>& records) {
  std::string out;
  for (const auto& r : records) out += record_json(r).dump() + "\n";
  return out;
}

std::vector<ResultsRecord> parse_results(const std::string& text, const std::string& where) {
  std::vector<ResultsRecord> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string w = fmt::format("{}:{}", where, lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ContractError(w + ": " + e.what());
    }
    ResultsRecord r;
    r.method = io::field<std::string>(j, "method", w);
    r.modalities = io::field<std::string>(j, "modalities", w);
    r.task = io::field<std::string>(j, "task", w);
    r.accuracy = io::field<double>(j, "accuracy", w);
    r.precision = io::field<double>(j, "precision", w);
    r.recall = io::field<double>(j, "recall", w);
    r.f1 = io::field<double>(j, "f1", w);
    r.n_train = io::field<int>(j, "n_train", w);
    r.n_test = io::field<int>(j, "n_test", w);
    for (double v : {r.accuracy, r.precision, r.recall, r.f1}) {
      if (!(v >= 0.0 && v <= 1.0)) throw ContractError(w + ": metric outside [0, 1]");
    }
    task_from_string(r.task);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark

Dataset assemble(const BenchInputs& in, const preprocess::ModalitySet& set, Task task,
                 const std::vector<std::string>& ids) {
  struct Source {
    const preprocess::FeatureTable* table;
    std::unordered_map<std::string, std::size_t> rows;
    std::size_t width;
  };
  std::vector<Source> sources;
  std::size_t dim = 0;
  for (auto m : set) {
    auto it = in.tables.find(m);
    if (it == in.tables.end())
      throw MissingInputError("features_" + std::string(telemetry::to_string(m)) + ".csv");
    Source s{&it->second, {}, it->second.columns.size() - 1};
    if (it->second.columns.empty() || it->second.columns.back().rfind("mask.", 0) != 0)
      throw ContractError("feature table for " + std::string(telemetry::to_string(m)) + " lacks its mask column");
    for (std::size_t r = 0; r < it->second.rows.size(); ++r) s.rows[it->second.rows[r].id] = r;
    dim += s.width + 1;
    sources.push_back(std::move(s));
  }
  Dataset ds;
  std::vector<std::vector<double>> rows;
  for (const auto& id : ids) {
    auto lab = in.labels.find(id);
    if (lab == in.labels.end()) throw ContractError("no labels for sample " + id);
    auto y = label_for(lab->second, task);
    if (!y) continue;
    std::vector<double> row;
    row.reserve(dim);
    std::vector<double> masks;
    for (const auto& s : sources) {
      auto r = s.rows.find(id);
      if (r == s.rows.end()) throw ContractError("feature table has no row for sample " + id);
      const auto& v = s.table->rows[r->second].values;
      row.insert(row.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(s.width));
      masks.push_back(v.back());
    }
    row.insert(row.end(), masks.begin(), masks.end());
    rows.push_back(std::move(row));
    ds.y.push_back(*y);
    ds.ids.push_back(id);
  }
  ds.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) ds.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return ds;
}

ResultsRecord run_cell(const BenchInputs& in, Method method, const preprocess::ModalitySet& set, Task task,
                       const Hyper& hyper) {
  const auto train = assemble(in, set, task, in.split.train);
  const auto test = assemble(in, set, task, in.split.test);
  // Train on the classes the split actually contains; a test class unseen in
  // training simply counts against recall.
  std::vector<int> to_original;
  std::map<int, int> to_compact;
  for (int y : train.y) to_compact.emplace(y, 0);
  for (auto& [original, compact] : to_compact) {
    compact = static_cast<int>(to_original.size());
    to_original.push_back(original);
  }
  std::vector<int> y;
  for (int v : train.y) y.push_back(to_compact.at(v));
  if (to_original.size() < 2)
    throw TrainingError(std::string(to_string(task)) + " training set holds fewer than two classes");
  auto model = make_classifier(method, hyper);
  model->fit(train.x, y, static_cast<int>(to_original.size()));
  auto predicted = model->predict(test.x);
  for (auto& v : predicted) v = to_original[static_cast<std::size_t>(v)];
  const auto m = evaluate(predicted, test.y, task);
  ResultsRecord r;
  r.method = std::string(to_string(method));
  r.modalities = preprocess::to_string(set);
  r.task = std::string(to_string(task));
  r.accuracy = m.accuracy;
  r.precision = m.precision;
  r.recall = m.recall;
  r.f1 = m.f1;
  r.n_train = static_cast<int>(train.y.size());
  r.n_test = static_cast<int>(test.y.size());
  return r;
}

std::vector<ResultsRecord> run_benchmark(const BenchInputs& in, const std::vector<Method>& methods,
                                         const std::vector<preprocess::ModalitySet>& sets,
                                         const std::vector<Task>& tasks, const Hyper& hyper, int threads) {
  struct Cell {
    Method method;
    const preprocess::ModalitySet* set;
    Task task;
  };
  std::vector<Cell> cells;
  for (auto m : methods) {
    for (const auto& s : sets) {
      for (auto t : tasks) cells.push_back({m, &s, t});
    }
  }
  std::vector<ResultsRecord> out(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    out[i] = run_cell(in, cells[i].method, *cells[i].set, cells[i].task, hyper);
  });
  return out;
}

std::string render_report(const std::vector<ResultsRecord>& records, const std::string& header_note) {
  std::vector<std::pair<std::string, std::string>> rows;
  std::map<std::pair<std::string, std::string>, std::map<char, const ResultsRecord*>> cells;
  for (const auto& r : records) {
    const auto key = std::pair{r.method, r.modalities};
    if (!cells.contains(key)) rows.push_back(key);
    cells[key][task_letter(task_from_string(r.task))] = &r;
  }
  auto triplet = [&](const std::map<char, const ResultsRecord*>& c, double ResultsRecord::*field) {
    std::string out;
    for (char t : {'D', 'C', 'L'}) {
      if (!out.empty()) out += '/';
      auto it = c.find(t);
      out += it == c.end() ? "-" : fmt::format("{:.3f}", it->second->*field);
    }
    return out;
  };

  std::string md = "# Diagnosis benchmark\n\n";
  if (!header_note.empty()) md += header_note + "\n\n";
  md +=
      "Detection reports positive-class precision, recall and F1. Classification and localization report "
      "precision and recall macro-averaged over the classes present in the test labels, with F1 their harmonic "
      "mean. Localization is trained and scored on fault-present samples only; an extra \"no fault\" class is "
      "the alternative not taken here.\n\n";
  md += "## Results (D/C/L)\n\n";
  md += "| Method | Modalities | F1 | Accuracy | Precision | Recall |\n|---|---|---|---|---|---|\n";
  for (const auto& key : rows) {
    const auto& c = cells[key];
    md += fmt::format("| {} | {} | {} | {} | {} | {} |\n", key.first, key.second, triplet(c, &ResultsRecord::f1),
                      triplet(c, &ResultsRecord::accuracy), triplet(c, &ResultsRecord::precision),
                      triplet(c, &ResultsRecord::recall));
  }

  std::string fusion;
  for (const auto& key : rows) {
    if (key.second.find('+') == std::string::npos) continue;
    std::vector<std::string> parts;
    std::stringstream ss(key.second);
    for (std::string p; std::getline(ss, p, '+');) parts.push_back(p);
    std::string deltas;
    bool complete = true;
    for (char t : {'D', 'C', 'L'}) {
      auto fit = cells[key].find(t);
      double best = -1.0;
      for (const auto& p : parts) {
        auto sit = cells.find({key.first, p});
        if (sit == cells.end() || !sit->second.contains(t)) continue;
        best = std::max(best, sit->second.at(t)->f1);
      }
      if (fit == cells[key].end() || best < 0.0) {
        complete = false;
        break;
      }
      if (!deltas.empty()) deltas += " / ";
      deltas += fmt::format("{:+.2f}", fit->second->f1 - best);
    }
    if (complete) fusion += fmt::format("| {} | {} | {} |\n", key.first, key.second, deltas);
  }
  if (!fusion.empty()) {
    md += "\n## Fusion gains over the best single modality (F1, D / C / L)\n\n";
    md += "| Method | Modalities | Delta |\n|---|---|---|\n" + fusion;
  }
  return md;
}

}  // namespace wifidiag::diagnosis
