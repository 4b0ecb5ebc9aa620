/*
 * Copyright 2026 The mbbminer Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mbbminer/qrf.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mbbminer/csv.hpp"
#include "mbbminer/error.hpp"
#include "mbbminer/random.hpp"

namespace mbbminer {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Running target statistics of one side of a split (targets centred on the
// node mean).
struct SideStats {
  double n = 0, sum = 0, sumsq = 0;
  void add(double c, double w = 1.0) {
    n += w;
    sum += c * w;
    sumsq += c * c * w;
  }
  SideStats operator+(const SideStats& o) const { return {n + o.n, sum + o.sum, sumsq + o.sumsq}; }
  SideStats operator-(const SideStats& o) const { return {n - o.n, sum - o.sum, sumsq - o.sumsq}; }
  double sse() const { return n > 0 ? std::max(0.0, sumsq - sum * sum / n) : 0.0; }
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  int category = -1;
  bool null_left = true;
  double sse = std::numeric_limits<double>::infinity();
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<ContextColumn>& cols,
              const ForestParams& p, int mtry)
      : x_(x), y_(y), cols_(cols), params_(p), mtry_(mtry) {}

  Tree build(std::uint64_t seed) const {
    Rng rng(seed);
    const int n = static_cast<int>(y_.size());
    std::vector<int> sample(static_cast<std::size_t>(n));
    if (params_.bootstrap) {
      for (auto& s : sample) s = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    } else {
      for (int i = 0; i < n; ++i) sample[static_cast<std::size_t>(i)] = i;
    }
    Tree tree;
    // Nodes are numbered when popped, which yields preorder.
    struct Pending {
      int parent;
      bool left;
      int depth;
      std::vector<int> samples;
    };
    std::vector<Pending> stack;
    stack.push_back({-1, true, 0, std::move(sample)});
    while (!stack.empty()) {
      Pending cur = std::move(stack.back());
      stack.pop_back();
      const int id = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      if (cur.parent >= 0) {
        TreeNode& parent = tree.nodes[static_cast<std::size_t>(cur.parent)];
        (cur.left ? parent.left : parent.right) = id;
      }
      const Split split = best_split(cur.samples, cur.depth, rng);
      if (split.feature < 0) {
        std::sort(cur.samples.begin(), cur.samples.end());
        tree.nodes[static_cast<std::size_t>(id)].samples = std::move(cur.samples);
        continue;
      }
      std::vector<int> left, right;
      for (int i : cur.samples) (goes_left(split, x_(i, split.feature)) ? left : right).push_back(i);
      TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.category = split.category;
      node.null_left = split.null_left;
      // Right first so the left subtree is expanded first.
      stack.push_back({id, false, cur.depth + 1, std::move(right)});
      stack.push_back({id, true, cur.depth + 1, std::move(left)});
    }
    return tree;
  }

 private:
  static bool goes_left(const Split& s, double v) {
    if (std::isnan(v)) return s.null_left;
    if (s.category >= 0) return static_cast<int>(v) == s.category;
    return v <= s.threshold;
  }

  Split best_split(const std::vector<int>& samples, int depth, Rng& rng) const {
    Split best;
    const double m = static_cast<double>(samples.size());
    if (params_.max_depth && depth >= *params_.max_depth) return best;
    if (m < 2.0 * params_.min_leaf) return best;
    double mean = 0.0;
    for (int i : samples) mean += y_(i);
    mean /= m;
    SideStats parent;
    for (int i : samples) parent.add(y_(i) - mean);
    const double parent_sse = parent.sse();
    if (parent_sse <= 0.0) return best;

    // Sample mtry features without replacement (partial Fisher-Yates).
    const int p = static_cast<int>(cols_.size());
    std::vector<int> order(static_cast<std::size_t>(p));
    for (int f = 0; f < p; ++f) order[static_cast<std::size_t>(f)] = f;
    for (int k = 0; k < mtry_; ++k) {
      const int j = k + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(p - k)));
      std::swap(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(j)]);
    }
    for (int k = 0; k < mtry_; ++k) {
      const int f = order[static_cast<std::size_t>(k)];
      if (cols_[static_cast<std::size_t>(f)].categorical) scan_categorical(f, samples, mean, best);
      else scan_numeric(f, samples, mean, best);
    }
    if (best.feature >= 0 && !(best.sse < parent_sse - 1e-12 * parent_sse)) best = Split{};
    return best;
  }

  // Adds the Null group to the majority side and scores the split.
  void consider(const SideStats& left, const SideStats& right, const SideStats& nulls, Split candidate,
                Split& best) const {
    candidate.null_left = left.n >= right.n;
    const SideStats l = candidate.null_left ? left + nulls : left;
    const SideStats r = candidate.null_left ? right : right + nulls;
    if (l.n < params_.min_leaf || r.n < params_.min_leaf) return;
    candidate.sse = l.sse() + r.sse();
    if (candidate.sse < best.sse) best = candidate;
  }

  void scan_numeric(int f, const std::vector<int>& samples, double mean, Split& best) const {
    std::vector<std::pair<double, double>> xs;  // (x, centred y)
    xs.reserve(samples.size());
    SideStats nulls, total;
    for (int i : samples) {
      const double v = x_(i, f);
      const double c = y_(i) - mean;
      if (std::isnan(v)) {
        nulls.add(c);
      } else {
        xs.emplace_back(v, c);
        total.add(c);
      }
    }
    if (xs.size() < 2) return;
    std::sort(xs.begin(), xs.end());
    SideStats left;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      left.add(xs[i].second);
      const double a = xs[i].first, b = xs[i + 1].first;
      if (!(a < b)) continue;
      double thr = a + (b - a) / 2.0;
      if (!(thr < b)) thr = a;
      Split c;
      c.feature = f;
      c.threshold = thr;
      consider(left, total - left, nulls, c, best);
    }
  }

  void scan_categorical(int f, const std::vector<int>& samples, double mean, Split& best) const {
    std::map<int, SideStats> by_code;
    SideStats nulls, total;
    for (int i : samples) {
      const double v = x_(i, f);
      const double c = y_(i) - mean;
      if (std::isnan(v)) {
        nulls.add(c);
      } else {
        by_code[static_cast<int>(v)].add(c);
        total.add(c);
      }
    }
    if (by_code.size() < 2) return;
    for (const auto& [code, stats] : by_code) {
      Split c;
      c.feature = f;
      c.category = code;
      consider(stats, total - stats, nulls, c, best);
    }
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  const std::vector<ContextColumn>& cols_;
  const ForestParams& params_;
  int mtry_;
};

double encode_value(const ContextColumn& col, const FeatureValue& v) {
  if (is_null(v)) return kNaN;
  if (col.categorical) {
    const auto* s = std::get_if<std::string>(&v);
    if (!s) return -1.0;
    auto it = std::lower_bound(col.categories.begin(), col.categories.end(), *s);
    if (it == col.categories.end() || *it != *s) return -1.0;
    return static_cast<double>(it - col.categories.begin());
  }
  const auto* d = std::get_if<double>(&v);
  return d ? *d : kNaN;
}

}  // namespace

QrfModel fit_qrf(std::span<const Instance> instances, const std::string& target,
                 const std::vector<std::string>& context, const ForestParams& params) {
  if (params.n_trees < 1) throw Error(ErrorCode::kInvalidArgument, "n_trees must be >= 1");
  if (params.min_leaf < 1) throw Error(ErrorCode::kInvalidArgument, "min_leaf must be >= 1");
  if (params.max_depth && *params.max_depth < 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_depth must be >= 0");
  }
  if (context.empty()) throw Error(ErrorCode::kNoUsableFeatures, "no context features given");

  std::vector<const Instance*> rows;
  for (const auto& inst : instances) {
    const FeatureValue& v = inst.value(target);
    if (is_null(v)) continue;
    if (!is_numeric(v)) throw Error(ErrorCode::kInvalidArgument, "target '" + target + "' is not numeric");
    rows.push_back(&inst);
  }
  if (rows.size() < 2 * static_cast<std::size_t>(params.min_leaf)) {
    throw Error(ErrorCode::kInsufficientData,
                std::to_string(rows.size()) + " usable instances; need at least " +
                    std::to_string(2 * params.min_leaf));
  }

  QrfModel model;
  model.target = target;
  model.params = params;
  bool any_data = false;
  for (const auto& name : context) {
    ContextColumn col;
    col.name = name;
    bool numeric = false;
    std::set<std::string> cats;
    for (const auto* r : rows) {
      const FeatureValue& v = r->value(name);
      if (const auto* s = std::get_if<std::string>(&v)) cats.insert(*s);
      else if (is_numeric(v)) numeric = true;
    }
    if (numeric && !cats.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "context feature '" + name + "' mixes numbers and categories");
    }
    col.categorical = !cats.empty();
    col.categories.assign(cats.begin(), cats.end());
    any_data = any_data || numeric || !cats.empty();
    model.columns.push_back(std::move(col));
  }
  if (!any_data) throw Error(ErrorCode::kNoUsableFeatures, "every context feature is Null");

  const int p = static_cast<int>(model.columns.size());
  const int mtry = params.mtry.value_or(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p)))));
  if (mtry < 1 || mtry > p) {
    throw Error(ErrorCode::kInvalidArgument, "mtry must be in [1, " + std::to_string(p) + "]");
  }
  model.params.mtry = mtry;

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, p);
  model.targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Instance& inst = *rows[static_cast<std::size_t>(i)];
    model.targets(i) = std::get<double>(inst.value(target));
    for (int f = 0; f < p; ++f) {
      const auto& col = model.columns[static_cast<std::size_t>(f)];
      x(i, f) = encode_value(col, inst.value(col.name));
    }
  }

  TreeBuilder builder(x, model.targets, model.columns, model.params, mtry);
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  int workers = params.threads > 0 ? params.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, params.n_trees);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    try {
      for (int t = next++; t < params.n_trees; t = next++) {
        model.trees[static_cast<std::size_t>(t)] =
            builder.build(mix_seed(params.seed, static_cast<std::uint64_t>(t)));
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      failure = std::current_exception();
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return model;
}

Eigen::VectorXd encode_context(const QrfModel& model, const Instance& x) {
  Eigen::VectorXd row(static_cast<Eigen::Index>(model.columns.size()));
  for (std::size_t f = 0; f < model.columns.size(); ++f) {
    row(static_cast<Eigen::Index>(f)) = encode_value(model.columns[f], x.value(model.columns[f].name));
  }
  return row;
}

int route(const Tree& tree, const Eigen::Ref<const Eigen::VectorXd>& row) {
  int i = 0;
  while (!tree.nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(i)];
    const double v = row(node.feature);
    bool left;
    if (std::isnan(v)) left = node.null_left;
    else if (node.category >= 0) left = static_cast<int>(v) == node.category;
    else left = v <= node.threshold;
    i = left ? node.left : node.right;
  }
  return i;
}

std::vector<std::pair<int, double>> prediction_weights(const QrfModel& model, const Instance& x) {
  if (!model.fitted()) throw Error(ErrorCode::kUnfittedModel, "model has not been fitted");
  const Eigen::VectorXd row = encode_context(model, x);
  std::vector<std::pair<int, double>> pairs;
  const double per_tree = 1.0 / static_cast<double>(model.trees.size());
  for (const Tree& tree : model.trees) {
    const auto& leaf = tree.nodes[static_cast<std::size_t>(route(tree, row))].samples;
    const double w = per_tree / static_cast<double>(leaf.size());
    for (int i : leaf) pairs.emplace_back(i, w);
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, double>> out;
  for (const auto& [i, w] : pairs) {
    if (!out.empty() && out.back().first == i) out.back().second += w;
    else out.emplace_back(i, w);
  }
  return out;
}

std::vector<double> predict_quantiles(const QrfModel& model, const Instance& x,
                                      std::span<const double> qs) {
  for (double q : qs) {
    if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::kInvalidArgument, "quantile must lie in (0, 1)");
  }
  auto weights = prediction_weights(model, x);
  std::sort(weights.begin(), weights.end(), [&](const auto& a, const auto& b) {
    const double ya = model.targets(a.first), yb = model.targets(b.first);
    return ya != yb ? ya < yb : a.first < b.first;
  });
  std::vector<double> out;
  out.reserve(qs.size());
  for (double q : qs) {
    double cum = 0.0;
    double y = model.targets(weights.back().first);
    for (const auto& [i, w] : weights) {
      cum += w;
      // Weights are sums of 1/(T*|leaf|); absorb accumulation error.
      if (cum >= q - 1e-12) {
        y = model.targets(i);
        break;
      }
    }
    out.push_back(y);
  }
  return out;
}

double predict_quantile(const QrfModel& model, const Instance& x, double q) {
  const double qs[] = {q};
  return predict_quantiles(model, x, qs).front();
}

std::string serialize_model(const QrfModel& model) {
  if (!model.fitted()) throw Error(ErrorCode::kUnfittedModel, "model has not been fitted");
  std::ostringstream out;
  const auto& p = model.params;
  out << "mbbminer-qrf 1\n";
  out << "target " << escape_token(model.target) << "\n";
  out << "params " << p.n_trees << ' ' << p.min_leaf << ' ' << p.mtry.value_or(0) << ' '
      << (p.max_depth ? std::to_string(*p.max_depth) : std::string("-")) << ' ' << p.seed << ' '
      << (p.bootstrap ? 1 : 0) << "\n";
  out << "columns " << model.columns.size() << "\n";
  for (const auto& c : model.columns) {
    out << "column " << escape_token(c.name);
    if (c.categorical) {
      out << " categorical " << c.categories.size();
      for (const auto& cat : c.categories) out << ' ' << escape_token(cat);
    } else {
      out << " numeric";
    }
    out << "\n";
  }
  out << "targets " << model.targets.size();
  for (Eigen::Index i = 0; i < model.targets.size(); ++i) out << ' ' << format_double(model.targets(i));
  out << "\n";
  for (const Tree& tree : model.trees) {
    out << "tree " << tree.nodes.size() << "\n";
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const TreeNode& node = tree.nodes[static_cast<std::size_t>(stack.back())];
      stack.pop_back();
      if (node.is_leaf()) {
        out << "leaf " << node.samples.size();
        for (int s : node.samples) out << ' ' << s;
        out << "\n";
      } else {
        out << "split " << node.feature << ' '
            << (node.category >= 0 ? "c" + std::to_string(node.category) : format_double(node.threshold))
            << ' ' << (node.null_left ? 1 : 0) << "\n";
        stack.push_back(node.right);
        stack.push_back(node.left);
      }
    }
  }
  out << "end\n";
  return out.str();
}

namespace {

class Reader {
 public:
  explicit Reader(std::string_view text) : in_(std::string(text)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) fail("unexpected end of model");
    return w;
  }
  void expect(const std::string& w) {
    if (word() != w) fail("expected '" + w + "'");
  }
  long long integer() {
    const std::string w = word();
    long long v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) fail("expected integer, got '" + w + "'");
    return v;
  }
  double real() {
    const std::string w = word();
    auto v = parse_double(w);
    if (!v) fail("expected number, got '" + w + "'");
    return *v;
  }
  std::uint64_t unsigned_integer() {
    const std::string w = word();
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) fail("expected unsigned integer, got '" + w + "'");
    return v;
  }
  [[noreturn]] static void fail(const std::string& msg) { throw Error(ErrorCode::kParse, "model: " + msg); }

 private:
  std::istringstream in_;
};

}  // namespace

QrfModel deserialize_model(std::string_view text) {
  Reader r(text);
  r.expect("mbbminer-qrf");
  if (r.integer() != 1) Reader::fail("unsupported model version");
  QrfModel m;
  r.expect("target");
  m.target = unescape_token(r.word());
  r.expect("params");
  m.params.n_trees = static_cast<int>(r.integer());
  m.params.min_leaf = static_cast<int>(r.integer());
  m.params.mtry = static_cast<int>(r.integer());
  const std::string depth = r.word();
  if (depth != "-") {
    int d = 0;
    auto [ptr, ec] = std::from_chars(depth.data(), depth.data() + depth.size(), d);
    if (ec != std::errc() || ptr != depth.data() + depth.size()) Reader::fail("bad max_depth");
    m.params.max_depth = d;
  }
  m.params.seed = r.unsigned_integer();
  m.params.bootstrap = r.integer() != 0;
  r.expect("columns");
  const auto ncol = r.integer();
  for (long long c = 0; c < ncol; ++c) {
    r.expect("column");
    ContextColumn col;
    col.name = unescape_token(r.word());
    const std::string kind = r.word();
    if (kind == "categorical") {
      col.categorical = true;
      const auto k = r.integer();
      for (long long i = 0; i < k; ++i) col.categories.push_back(unescape_token(r.word()));
    } else if (kind != "numeric") {
      Reader::fail("bad column kind '" + kind + "'");
    }
    m.columns.push_back(std::move(col));
  }
  r.expect("targets");
  const auto n = r.integer();
  m.targets.resize(static_cast<Eigen::Index>(n));
  for (long long i = 0; i < n; ++i) m.targets(static_cast<Eigen::Index>(i)) = r.real();
  for (int t = 0; t < m.params.n_trees; ++t) {
    r.expect("tree");
    const auto count = r.integer();
    Tree tree;
    tree.nodes.resize(static_cast<std::size_t>(count));
    // Preorder: node ids are assigned in reading order; children are wired
    // via a stack of nodes awaiting their right subtree.
    std::vector<int> awaiting_right;
    int next_id = 0;
    int parent_for_next = -1;
    bool next_is_left = false;
    for (long long k = 0; k < count; ++k) {
      const int id = next_id++;
      if (id >= count) Reader::fail("tree node overflow");
      if (parent_for_next >= 0) {
        auto& parent = tree.nodes[static_cast<std::size_t>(parent_for_next)];
        (next_is_left ? parent.left : parent.right) = id;
      }
      TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
      const std::string kind = r.word();
      if (kind == "split") {
        node.feature = static_cast<int>(r.integer());
        const std::string thr = r.word();
        if (!thr.empty() && thr[0] == 'c') {
          auto [ptr, ec] = std::from_chars(thr.data() + 1, thr.data() + thr.size(), node.category);
          if (ec != std::errc() || ptr != thr.data() + thr.size() || node.category < 0) {
            Reader::fail("bad category '" + thr + "'");
          }
        } else if (auto v = parse_double(thr)) node.threshold = *v;
        else Reader::fail("bad threshold '" + thr + "'");
        node.null_left = r.integer() != 0;
        if (node.feature < 0 || node.feature >= static_cast<int>(m.columns.size())) {
          Reader::fail("split feature out of range");
        }
        awaiting_right.push_back(id);
        parent_for_next = id;
        next_is_left = true;
      } else if (kind == "leaf") {
        const auto k2 = r.integer();
        for (long long i = 0; i < k2; ++i) {
          const auto s = r.integer();
          if (s < 0 || s >= n) Reader::fail("leaf sample out of range");
          node.samples.push_back(static_cast<int>(s));
        }
        if (node.samples.empty()) Reader::fail("empty leaf");
        if (awaiting_right.empty()) {
          parent_for_next = -1;
        } else {
          parent_for_next = awaiting_right.back();
          awaiting_right.pop_back();
          next_is_left = false;
        }
      } else {
        Reader::fail("bad node kind '" + kind + "'");
      }
    }
    if (!awaiting_right.empty()) Reader::fail("truncated tree");
    m.trees.push_back(std::move(tree));
  }
  r.expect("end");
  return m;
}

}  // namespace mbbminer
