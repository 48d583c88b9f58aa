#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wifidiag/dataset.hpp"
#include "wifidiag/preprocess.hpp"

namespace wifidiag::diagnosis {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Task { Detection, Classification, Localization };
inline constexpr std::array<Task, 3> kAllTasks = {Task::Detection, Task::Classification, Task::Localization};
std::string_view to_string(Task t);
Task task_from_string(std::string_view s);
char task_letter(Task t);

enum class Method { LogReg, KNN, DecisionTree, MLP };
inline constexpr std::array<Method, 4> kAllMethods = {Method::LogReg, Method::KNN, Method::DecisionTree, Method::MLP};
std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

/// Class index for a task, or nullopt when the sample is outside the task
/// (normal samples have no localization label).
std::optional<int> label_for(const dataset::Labels& labels, Task task);
int class_count(Task task, int n_nodes);

struct Hyper {
  std::uint64_t seed = 7;
  int logreg_epochs = 400;
  double logreg_lr = 0.05;
  double logreg_l2 = 1e-4;
  int knn_k = 5;
  int tree_max_depth = 12;
  int tree_min_leaf = 1;
  int mlp_hidden = 64;
  int mlp_epochs = 400;
  double mlp_lr = 0.01;
  double mlp_l2 = 1e-4;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  /// Throws TrainingError naming any class in [0, n_classes) without
  /// training examples, or on shape mismatch.
  virtual void fit(const Matrix& x, const std::vector<int>& y, int n_classes) = 0;
  virtual std::vector<int> predict(const Matrix& x) const = 0;
  virtual std::string name() const = 0;
};

std::unique_ptr<Classifier> make_classifier(Method method, const Hyper& hyper);

/// Multinomial logistic regression on class-balanced cross-entropy, trained
/// full-batch with Adam.
class LogReg : public Classifier {
 public:
  explicit LogReg(const Hyper& h) : hyper_(h) {}
  void fit(const Matrix& x, const std::vector<int>& y, int n_classes) override;
  std::vector<int> predict(const Matrix& x) const override;
  std::string name() const override { return "LogReg"; }
  Matrix scores(const Matrix& x) const;

 private:
  Hyper hyper_;
  Matrix w_;
  Vector b_;
};

/// Majority vote over the k nearest training rows (Euclidean). Vote ties go
/// to the class with the nearest member, then to the smaller label.
class Knn : public Classifier {
 public:
  explicit Knn(int k) : k_(k) {}
  void fit(const Matrix& x, const std::vector<int>& y, int n_classes) override;
  std::vector<int> predict(const Matrix& x) const override;
  std::string name() const override { return "KNN"; }

 private:
  int k_;
  int n_classes_ = 0;
  Matrix x_;
  std::vector<int> y_;
};

/// CART with Gini impurity and midpoint thresholds.
class DecisionTree : public Classifier {
 public:
  DecisionTree(int max_depth, int min_leaf) : max_depth_(max_depth), min_leaf_(min_leaf) {}
  void fit(const Matrix& x, const std::vector<int>& y, int n_classes) override;
  std::vector<int> predict(const Matrix& x) const override;
  std::string name() const override { return "DecisionTree"; }
  int depth() const;
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
  };
  int build(const Matrix& x, const std::vector<int>& y, std::vector<int>& idx, int depth);
  int max_depth_;
  int min_leaf_;
  int n_classes_ = 0;
  std::vector<Node> nodes_;
};

/// One tanh hidden layer, softmax output, class-balanced mean cross-entropy
/// plus L2 on the weight matrices. Parameters are packed as [W1, b1, W2, b2].
class Mlp : public Classifier {
 public:
  explicit Mlp(const Hyper& h) : hyper_(h) {}
  void fit(const Matrix& x, const std::vector<int>& y, int n_classes) override;
  std::vector<int> predict(const Matrix& x) const override;
  std::string name() const override { return "MLP"; }

  void init(int n_features, int n_classes);
  const Vector& params() const { return params_; }
  void set_params(const Vector& p) { params_ = p; }
  /// Loss at `params` and its gradient.
  double loss_and_gradient(const Vector& params, const Matrix& x, const std::vector<int>& y, Vector* grad) const;

 private:
  Matrix forward(const Vector& params, const Matrix& x, Matrix* hidden) const;
  Hyper hyper_;
  int d_ = 0;
  int h_ = 0;
  int k_ = 0;
  Vector params_;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Detection: positive-class metrics (class 1). Classification and
/// localization: precision and recall macro-averaged over the classes
/// present in `truth`, F1 their harmonic mean.
Metrics evaluate(const std::vector<int>& predicted, const std::vector<int>& truth, Task task);

struct ResultsRecord {
  std::string method;
  std::string modalities;
  std::string task;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int n_train = 0;
  int n_test = 0;
  friend bool operator==(const ResultsRecord&, const ResultsRecord&) = default;
};

std::string to_jsonl(const std::vector<ResultsRecord>& records);
/// Parses results lines; throws ContractError naming the offending field.
std::vector<ResultsRecord> parse_results(const std::string& text, const std::string& where);

/// Labelled feature matrix for one modality set, restricted to `ids`.
struct Dataset {
  Matrix x;
  std::vector<int> y;
  std::vector<std::string> ids;
};

struct BenchInputs {
  std::map<telemetry::Modality, preprocess::FeatureTable> tables;
  std::map<std::string, dataset::Labels> labels;
  dataset::Split split;
  int n_nodes = 0;
};

/// Concatenate the per-modality node blocks of `set`, then the masks.
Dataset assemble(const BenchInputs& in, const preprocess::ModalitySet& set, Task task,
                 const std::vector<std::string>& ids);

ResultsRecord run_cell(const BenchInputs& in, Method method, const preprocess::ModalitySet& set, Task task,
                       const Hyper& hyper);

std::vector<ResultsRecord> run_benchmark(const BenchInputs& in, const std::vector<Method>& methods,
                                         const std::vector<preprocess::ModalitySet>& sets,
                                         const std::vector<Task>& tasks, const Hyper& hyper, int threads = 1);

/// Markdown report: one (D/C/L) F1 triplet row per (method, modality set),
/// then fusion rows as deltas against the best constituent single modality.
std::string render_report(const std::vector<ResultsRecord>& records, const std::string& header_note = "");

}  // namespace wifidiag::diagnosis
