#pragma once

// Smooth expressions on R^N: immutable DAGs with exact derivative rules.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "subcart/error.hpp"

namespace subcart {

using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Op : std::uint8_t {
  Var,
  Const,
  Sum,
  Product,
  Quotient,
  Power,
  Exp,
  Sin,
  Cos,
  Atan,
  Sqrt,
  Bump,      // B(t) = h(b-t) / (h(b-t) + h(t-a)),  h = flat-exp
  BumpTerm,  // B^p (1-B)^q (b-t)^-j (t-a)^-k on (a,b), 0 elsewhere (p,q >= 1)
  FlatExp,   // t^-j e^(-1/t) for t > 0, 0 otherwise
  Mask       // value where gate != 0, 0 elsewhere (extension by zero)
};

struct BumpShape {
  double a = 0.0;
  double b = 1.0;
  int p = 1;
  int q = 0;
  int j = 0;
  int k = 0;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Const;
  int index = 0;       // Var: coordinate; Power: exponent; FlatExp: order j
  double value = 0.0;  // Const
  BumpShape bump{};    // Bump, BumpTerm
  std::vector<NodePtr> args;
};

namespace detail {

inline double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

// Value of B^p (1-B)^q (b-t)^-j (t-a)^-k; p = 1, q = j = k = 0 gives B itself.
inline double bump_value(const BumpShape& s, double t) {
  if (t <= s.a) return (s.q == 0 && s.j == 0 && s.k == 0) ? 1.0 : 0.0;
  if (t >= s.b) return (s.p == 0 && s.j == 0 && s.k == 0) ? 1.0 : 0.0;
  const double u = s.b - t;
  const double v = t - s.a;
  const double z = 1.0 / u - 1.0 / v;
  const double log_b = -softplus(z);
  const double log_1mb = -softplus(-z);
  return std::exp(s.p * log_b + s.q * log_1mb - s.j * std::log(u) -
                  s.k * std::log(v));
}

// d/dt of the BumpTerm family expressed inside the family.
inline std::vector<std::pair<double, BumpShape>> bump_derivative_terms(
    const BumpShape& s) {
  std::vector<std::pair<double, BumpShape>> out;
  auto add = [&](double c, int dp, int dq, int dj, int dk) {
    if (c == 0.0) return;
    BumpShape t = s;
    t.p += dp;
    t.q += dq;
    t.j += dj;
    t.k += dk;
    out.emplace_back(c, t);
  };
  // dB^p/dt = -p B^p (1-B) g',  d(1-B)^q/dt = q (1-B)^q B g',
  // g' = (b-t)^-2 + (t-a)^-2
  add(-s.p, 0, 1, 2, 0);
  add(-s.p, 0, 1, 0, 2);
  add(s.q, 1, 0, 2, 0);
  add(s.q, 1, 0, 0, 2);
  add(s.j, 0, 0, 1, 0);
  add(-s.k, 0, 0, 0, 1);
  return out;
}

inline double bump_derivative(const BumpShape& s, double t) {
  if (t <= s.a || t >= s.b) return 0.0;
  double d = 0.0;
  for (const auto& [c, shape] : bump_derivative_terms(s)) {
    d += c * bump_value(shape, t);
  }
  return d;
}

inline double flat_value(int j, double t) {
  if (t <= 0.0) return 0.0;
  return std::exp(-1.0 / t - j * std::log(t));
}

inline double flat_derivative(int j, double t) {
  if (t <= 0.0) return 0.0;
  return -j * flat_value(j + 1, t) + flat_value(j + 2, t);
}

inline NodePtr make_node(Node n) { return std::make_shared<const Node>(std::move(n)); }

inline NodePtr constant_node(double c) {
  Node n;
  n.op = Op::Const;
  n.value = c;
  return make_node(std::move(n));
}

inline bool is_const(const NodePtr& n, double c) {
  return n->op == Op::Const && n->value == c;
}

inline NodePtr sum_node(std::vector<NodePtr> terms) {
  std::vector<NodePtr> kept;
  double folded = 0.0;
  for (auto& t : terms) {
    if (t->op == Op::Const) {
      folded += t->value;
    } else if (t->op == Op::Sum) {
      for (const auto& inner : t->args) kept.push_back(inner);
    } else {
      kept.push_back(std::move(t));
    }
  }
  if (folded != 0.0 || kept.empty()) kept.push_back(constant_node(folded));
  if (kept.size() == 1) return kept.front();
  Node n;
  n.op = Op::Sum;
  n.args = std::move(kept);
  return make_node(std::move(n));
}

inline NodePtr product_node(std::vector<NodePtr> factors) {
  std::vector<NodePtr> kept;
  double folded = 1.0;
  for (auto& f : factors) {
    if (f->op == Op::Const) {
      folded *= f->value;
    } else {
      kept.push_back(std::move(f));
    }
  }
  if (folded == 0.0) return constant_node(0.0);
  if (folded != 1.0 || kept.empty()) kept.insert(kept.begin(), constant_node(folded));
  if (kept.size() == 1) return kept.front();
  Node n;
  n.op = Op::Product;
  n.args = std::move(kept);
  return make_node(std::move(n));
}

inline NodePtr unary_node(Op op, NodePtr arg) {
  Node n;
  n.op = op;
  n.args = {std::move(arg)};
  return make_node(std::move(n));
}

inline NodePtr quotient_node(NodePtr num, NodePtr den) {
  if (is_const(num, 0.0)) return constant_node(0.0);
  if (is_const(den, 1.0)) return num;
  Node n;
  n.op = Op::Quotient;
  n.args = {std::move(num), std::move(den)};
  return make_node(std::move(n));
}

inline NodePtr power_node(NodePtr base, int k) {
  if (k == 0) return constant_node(1.0);
  if (k == 1) return base;
  if (base->op == Op::Const) return constant_node(std::pow(base->value, k));
  Node n;
  n.op = Op::Power;
  n.index = k;
  n.args = {std::move(base)};
  return make_node(std::move(n));
}

inline NodePtr bump_term_node(const BumpShape& shape, NodePtr arg) {
  Node n;
  n.op = Op::BumpTerm;
  n.bump = shape;
  n.args = {std::move(arg)};
  return make_node(std::move(n));
}

inline NodePtr flat_node(int j, NodePtr arg) {
  Node n;
  n.op = Op::FlatExp;
  n.index = j;
  n.args = {std::move(arg)};
  return make_node(std::move(n));
}

inline NodePtr mask_node(NodePtr gate, NodePtr value) {
  if (is_const(value, 0.0)) return value;
  Node n;
  n.op = Op::Mask;
  n.args = {std::move(gate), std::move(value)};
  return make_node(std::move(n));
}

// Flattened DAG shared by every evaluation of one set of roots.
struct Program {
  std::vector<const Node*> nodes;
  std::vector<std::vector<int>> children;
  std::vector<int> roots;

  explicit Program(const std::vector<NodePtr>& root_nodes) {
    std::unordered_map<const Node*, int> ids;
    // Iterative post-order so deep sums cannot overflow the stack.
    for (const auto& root : root_nodes) {
      std::vector<std::pair<const Node*, std::size_t>> stack{{root.get(), 0}};
      while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (ids.count(node)) {
          stack.pop_back();
          continue;
        }
        if (next < node->args.size()) {
          const Node* child = node->args[next++].get();
          if (!ids.count(child)) stack.emplace_back(child, 0);
          continue;
        }
        const int id = static_cast<int>(nodes.size());
        ids.emplace(node, id);
        nodes.push_back(node);
        std::vector<int> kids;
        kids.reserve(node->args.size());
        for (const auto& a : node->args) kids.push_back(ids.at(a.get()));
        children.push_back(std::move(kids));
        stack.pop_back();
      }
      roots.push_back(ids.at(root.get()));
    }
  }
};

// Lazy evaluator: mask values are only computed where their gate is nonzero.
class Evaluator {
 public:
  Evaluator(const Program& prog, const Point& x, bool with_gradient)
      : prog_(prog),
        x_(x),
        dim_(static_cast<int>(x.size())),
        grad_(with_gradient),
        value_(prog.nodes.size(), 0.0),
        state_(prog.nodes.size(), 0) {
    if (grad_) gradient_.assign(prog.nodes.size() * static_cast<std::size_t>(dim_), 0.0);
  }

  double value(int id) {
    ensure(id);
    return value_[static_cast<std::size_t>(id)];
  }

  const double* gradient(int id) {
    ensure(id);
    return gradient_.data() + static_cast<std::size_t>(id) * static_cast<std::size_t>(dim_);
  }

 private:
  void ensure(int root) {
    if (state_[static_cast<std::size_t>(root)] == 2) return;
    // Explicit stack; a node is computed once its needed children are done.
    std::vector<int> stack{root};
    while (!stack.empty()) {
      const int id = stack.back();
      auto& st = state_[static_cast<std::size_t>(id)];
      if (st == 2) {
        stack.pop_back();
        continue;
      }
      const auto& kids = prog_.children[static_cast<std::size_t>(id)];
      const Node& node = *prog_.nodes[static_cast<std::size_t>(id)];
      bool pending = false;
      if (node.op == Op::Mask) {
        const int gate = kids[0];
        if (state_[static_cast<std::size_t>(gate)] != 2) {
          stack.push_back(gate);
          pending = true;
        } else if (value_[static_cast<std::size_t>(gate)] != 0.0 &&
                   state_[static_cast<std::size_t>(kids[1])] != 2) {
          stack.push_back(kids[1]);
          pending = true;
        }
      } else {
        for (int k : kids) {
          if (state_[static_cast<std::size_t>(k)] != 2) {
            stack.push_back(k);
            pending = true;
          }
        }
      }
      if (pending) continue;
      compute(id, node, kids);
      st = 2;
      stack.pop_back();
    }
  }

  double* g(int id) {
    return gradient_.data() + static_cast<std::size_t>(id) * static_cast<std::size_t>(dim_);
  }

  void chain(int id, int arg, double slope) {
    if (!grad_) return;
    double* out = g(id);
    const double* in = g(arg);
    for (int i = 0; i < dim_; ++i) out[i] = slope * in[i];
  }

  [[noreturn]] static void guard_failure(const char* what, double at) {
    std::ostringstream os;
    os << "guard violation: " << what << " at argument " << at;
    throw Error(ErrorKind::Guard, os.str());
  }

  void compute(int id, const Node& node, const std::vector<int>& kids) {
    double& v = value_[static_cast<std::size_t>(id)];
    auto val = [&](int k) { return value_[static_cast<std::size_t>(kids[static_cast<std::size_t>(k)])]; };
    switch (node.op) {
      case Op::Var:
        v = x_[node.index];
        if (grad_) g(id)[node.index] = 1.0;
        break;
      case Op::Const:
        v = node.value;
        break;
      case Op::Sum:
        v = 0.0;
        for (int k : kids) v += value_[static_cast<std::size_t>(k)];
        if (grad_) {
          double* out = g(id);
          for (int k : kids) {
            const double* in = g(k);
            for (int i = 0; i < dim_; ++i) out[i] += in[i];
          }
        }
        break;
      case Op::Product: {
        const std::size_t n = kids.size();
        std::vector<double> prefix(n + 1, 1.0), suffix(n + 1, 1.0);
        for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] * value_[static_cast<std::size_t>(kids[i])];
        for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] * value_[static_cast<std::size_t>(kids[i])];
        v = prefix[n];
        if (grad_) {
          double* out = g(id);
          for (std::size_t i = 0; i < n; ++i) {
            const double others = prefix[i] * suffix[i + 1];
            if (others == 0.0) continue;
            const double* in = g(kids[i]);
            for (int c = 0; c < dim_; ++c) out[c] += others * in[c];
          }
        }
        break;
      }
      case Op::Quotient: {
        const double num = val(0), den = val(1);
        if (den == 0.0) guard_failure("zero denominator", den);
        v = num / den;
        if (grad_) {
          double* out = g(id);
          const double* gn = g(kids[0]);
          const double* gd = g(kids[1]);
          for (int i = 0; i < dim_; ++i) out[i] = (gn[i] - v * gd[i]) / den;
        }
        break;
      }
      case Op::Power: {
        const double b = val(0);
        const int k = node.index;
        if (k < 0 && b == 0.0) guard_failure("negative power of zero", b);
        v = std::pow(b, k);
        chain(id, kids[0], k * std::pow(b, k - 1));
        break;
      }
      case Op::Exp:
        v = std::exp(val(0));
        chain(id, kids[0], v);
        break;
      case Op::Sin:
        v = std::sin(val(0));
        chain(id, kids[0], std::cos(val(0)));
        break;
      case Op::Cos:
        v = std::cos(val(0));
        chain(id, kids[0], -std::sin(val(0)));
        break;
      case Op::Atan: {
        const double a = val(0);
        v = std::atan(a);
        chain(id, kids[0], 1.0 / (1.0 + a * a));
        break;
      }
      case Op::Sqrt: {
        const double a = val(0);
        if (!(a > 0.0)) guard_failure("sqrt of non-positive value", a);
        v = std::sqrt(a);
        chain(id, kids[0], 0.5 / v);
        break;
      }
      case Op::Bump:
      case Op::BumpTerm:
        v = bump_value(node.bump, val(0));
        chain(id, kids[0], bump_derivative(node.bump, val(0)));
        break;
      case Op::FlatExp:
        v = flat_value(node.index, val(0));
        chain(id, kids[0], flat_derivative(node.index, val(0)));
        break;
      case Op::Mask:
        if (val(0) == 0.0) {
          v = 0.0;
        } else {
          v = val(1);
          chain(id, kids[1], 1.0);
        }
        break;
    }
    if (!std::isfinite(v)) guard_failure("non-finite value", v);
  }

  const Program& prog_;
  const Point& x_;
  int dim_;
  bool grad_;
  std::vector<double> value_;
  std::vector<double> gradient_;
  std::vector<std::uint8_t> state_;
};

struct ProgramCache {
  std::once_flag once;
  std::unique_ptr<Program> program;

  const Program& get(const std::vector<NodePtr>& roots) {
    std::call_once(once, [&] { program = std::make_unique<Program>(roots); });
    return *program;
  }
};

}  // namespace detail

/// A smooth function R^N -> R. Immutable; copies share structure.
class SmoothExpr {
 public:
  SmoothExpr() : SmoothExpr(1, detail::constant_node(0.0)) {}

  SmoothExpr(int ambient_dim, NodePtr root)
      : dim_(ambient_dim),
        root_(std::move(root)),
        cache_(std::make_shared<detail::ProgramCache>()) {
    if (dim_ < 1) throw Error(ErrorKind::Invalid, "ambient dimension must be positive");
  }

  static SmoothExpr constant(int ambient_dim, double c) {
    return {ambient_dim, detail::constant_node(c)};
  }

  /// Coordinate x_{i+1} (zero-based index).
  static SmoothExpr variable(int ambient_dim, int i) {
    if (i < 0 || i >= ambient_dim) {
      throw Error(ErrorKind::Invalid, "variable index " + std::to_string(i + 1) +
                                          " out of range for dimension " +
                                          std::to_string(ambient_dim));
    }
    Node n;
    n.op = Op::Var;
    n.index = i;
    return {ambient_dim, detail::make_node(std::move(n))};
  }

  int ambient_dim() const { return dim_; }
  const NodePtr& root() const { return root_; }
  bool is_constant(double c) const { return detail::is_const(root_, c); }

  double operator()(const Point& x) const {
    check_point(x);
    detail::Evaluator ev(program(), x, false);
    return ev.value(program().roots[0]);
  }

  Eigen::RowVectorXd gradient(const Point& x) const {
    check_point(x);
    const auto& prog = program();
    detail::Evaluator ev(prog, x, true);
    const double* gr = ev.gradient(prog.roots[0]);
    return Eigen::Map<const Eigen::RowVectorXd>(gr, dim_);
  }

  std::size_t node_count() const { return program().nodes.size(); }

  void check_point(const Point& x) const {
    if (x.size() != dim_) {
      throw Error(ErrorKind::Invalid, "point has dimension " + std::to_string(x.size()) +
                                          ", expression expects " + std::to_string(dim_));
    }
  }

 private:
  const detail::Program& program() const { return cache_->get({root_}); }

  int dim_;
  NodePtr root_;
  std::shared_ptr<detail::ProgramCache> cache_;
};

namespace detail {

inline void require_same_dim(const SmoothExpr& a, const SmoothExpr& b) {
  if (a.ambient_dim() != b.ambient_dim()) {
    throw Error(ErrorKind::Invalid, "ambient dimension mismatch between operands");
  }
}

}  // namespace detail

inline SmoothExpr operator+(const SmoothExpr& a, const SmoothExpr& b) {
  detail::require_same_dim(a, b);
  return {a.ambient_dim(), detail::sum_node({a.root(), b.root()})};
}

inline SmoothExpr operator*(const SmoothExpr& a, const SmoothExpr& b) {
  detail::require_same_dim(a, b);
  return {a.ambient_dim(), detail::product_node({a.root(), b.root()})};
}

inline SmoothExpr operator-(const SmoothExpr& a) {
  return {a.ambient_dim(), detail::product_node({detail::constant_node(-1.0), a.root()})};
}

inline SmoothExpr operator-(const SmoothExpr& a, const SmoothExpr& b) { return a + (-b); }

inline SmoothExpr operator/(const SmoothExpr& a, const SmoothExpr& b) {
  detail::require_same_dim(a, b);
  return {a.ambient_dim(), detail::quotient_node(a.root(), b.root())};
}

inline SmoothExpr operator+(const SmoothExpr& a, double c) { return a + SmoothExpr::constant(a.ambient_dim(), c); }
inline SmoothExpr operator+(double c, const SmoothExpr& a) { return a + c; }
inline SmoothExpr operator-(const SmoothExpr& a, double c) { return a + (-c); }
inline SmoothExpr operator-(double c, const SmoothExpr& a) { return SmoothExpr::constant(a.ambient_dim(), c) - a; }
inline SmoothExpr operator*(double c, const SmoothExpr& a) { return SmoothExpr::constant(a.ambient_dim(), c) * a; }
inline SmoothExpr operator*(const SmoothExpr& a, double c) { return c * a; }
inline SmoothExpr operator/(double c, const SmoothExpr& a) { return SmoothExpr::constant(a.ambient_dim(), c) / a; }
inline SmoothExpr operator/(const SmoothExpr& a, double c) { return a / SmoothExpr::constant(a.ambient_dim(), c); }

inline SmoothExpr sum(const std::vector<SmoothExpr>& terms, int ambient_dim) {
  std::vector<NodePtr> nodes;
  nodes.reserve(terms.size());
  for (const auto& t : terms) {
    if (t.ambient_dim() != ambient_dim) throw Error(ErrorKind::Invalid, "ambient dimension mismatch in sum");
    nodes.push_back(t.root());
  }
  return {ambient_dim, detail::sum_node(std::move(nodes))};
}

inline SmoothExpr pow(const SmoothExpr& a, int k) { return {a.ambient_dim(), detail::power_node(a.root(), k)}; }
inline SmoothExpr exp(const SmoothExpr& a) { return {a.ambient_dim(), detail::unary_node(Op::Exp, a.root())}; }
inline SmoothExpr sin(const SmoothExpr& a) { return {a.ambient_dim(), detail::unary_node(Op::Sin, a.root())}; }
inline SmoothExpr cos(const SmoothExpr& a) { return {a.ambient_dim(), detail::unary_node(Op::Cos, a.root())}; }
inline SmoothExpr atan(const SmoothExpr& a) { return {a.ambient_dim(), detail::unary_node(Op::Atan, a.root())}; }
inline SmoothExpr sqrt(const SmoothExpr& a) { return {a.ambient_dim(), detail::unary_node(Op::Sqrt, a.root())}; }

/// t -> e^(-1/t) for t > 0, else 0.
inline SmoothExpr flatexp(const SmoothExpr& a) { return {a.ambient_dim(), detail::flat_node(0, a.root())}; }

/// One-sided smooth step composed with `a`: 1 for a <= lo, 0 for a >= hi.
inline SmoothExpr bump(const SmoothExpr& a, double lo, double hi) {
  if (!(lo >= 0.0 && lo < hi)) {
    throw Error(ErrorKind::Invalid, "bump parameters must satisfy 0 <= a < b");
  }
  Node n;
  n.op = Op::Bump;
  n.bump = BumpShape{lo, hi, 1, 0, 0, 0};
  n.args = {a.root()};
  return {a.ambient_dim(), detail::make_node(std::move(n))};
}

/// Extension by zero: `value` where `gate` is nonzero, 0 elsewhere. `value` is
/// never evaluated where the gate vanishes. Smooth whenever value*[gate != 0]
/// is, e.g. gate a bump and value smooth near the bump's support.
inline SmoothExpr mask(const SmoothExpr& gate, const SmoothExpr& value) {
  detail::require_same_dim(gate, value);
  return {gate.ambient_dim(), detail::mask_node(gate.root(), value.root())};
}

/// Smooth bump: 1 on the closed ball (center, r_in), 0 outside the open
/// ball (center, r_out), values in [0, 1].
inline SmoothExpr make_bump(int ambient_dim, const Point& center, double r_in, double r_out) {
  if (center.size() != ambient_dim) throw Error(ErrorKind::Invalid, "bump center has wrong dimension");
  if (!(r_in >= 0.0 && r_in < r_out)) throw Error(ErrorKind::Invalid, "make_bump requires 0 <= r_in < r_out");
  std::vector<NodePtr> squares;
  for (int i = 0; i < ambient_dim; ++i) {
    auto diff = SmoothExpr::variable(ambient_dim, i) - center[i];
    squares.push_back(detail::power_node(diff.root(), 2));
  }
  SmoothExpr dist2{ambient_dim, detail::sum_node(std::move(squares))};
  return bump(dist2, r_in * r_in, r_out * r_out);
}

namespace detail {

class Differentiator {
 public:
  explicit Differentiator(int var) : var_(var) {}

  NodePtr diff(const NodePtr& n) {
    if (auto it = memo_.find(n.get()); it != memo_.end()) return it->second;
    NodePtr d = compute(n);
    memo_.emplace(n.get(), d);
    return d;
  }

 private:
  NodePtr compute(const NodePtr& n) {
    const auto& a = n->args;
    switch (n->op) {
      case Op::Var:
        return constant_node(n->index == var_ ? 1.0 : 0.0);
      case Op::Const:
        return constant_node(0.0);
      case Op::Sum: {
        std::vector<NodePtr> terms;
        for (const auto& t : a) terms.push_back(diff(t));
        return sum_node(std::move(terms));
      }
      case Op::Product: {
        std::vector<NodePtr> terms;
        for (std::size_t i = 0; i < a.size(); ++i) {
          NodePtr di = diff(a[i]);
          if (is_const(di, 0.0)) continue;
          std::vector<NodePtr> factors{di};
          for (std::size_t k = 0; k < a.size(); ++k) {
            if (k != i) factors.push_back(a[k]);
          }
          terms.push_back(product_node(std::move(factors)));
        }
        return sum_node(std::move(terms));
      }
      case Op::Quotient: {
        NodePtr dn = diff(a[0]);
        NodePtr dd = diff(a[1]);
        NodePtr num = sum_node({product_node({dn, a[1]}),
                                product_node({constant_node(-1.0), a[0], dd})});
        return quotient_node(num, power_node(a[1], 2));
      }
      case Op::Power: {
        const int k = n->index;
        return product_node({constant_node(k), power_node(a[0], k - 1), diff(a[0])});
      }
      case Op::Exp:
        return product_node({n, diff(a[0])});
      case Op::Sin:
        return product_node({unary_node(Op::Cos, a[0]), diff(a[0])});
      case Op::Cos:
        return product_node({constant_node(-1.0), unary_node(Op::Sin, a[0]), diff(a[0])});
      case Op::Atan: {
        NodePtr den = sum_node({constant_node(1.0), power_node(a[0], 2)});
        return quotient_node(diff(a[0]), den);
      }
      case Op::Sqrt:
        return quotient_node(diff(a[0]), product_node({constant_node(2.0), n}));
      case Op::Bump:
      case Op::BumpTerm: {
        std::vector<NodePtr> terms;
        for (const auto& [c, shape] : bump_derivative_terms(n->bump)) {
          BumpShape s = shape;
          terms.push_back(product_node({constant_node(c), bump_term_node(s, a[0])}));
        }
        return product_node({sum_node(std::move(terms)), diff(a[0])});
      }
      case Op::FlatExp: {
        const int j = n->index;
        NodePtr outer = sum_node({product_node({constant_node(-j), flat_node(j + 1, a[0])}),
                                  flat_node(j + 2, a[0])});
        return product_node({outer, diff(a[0])});
      }
      case Op::Mask:
        return mask_node(a[0], diff(a[1]));
    }
    return constant_node(0.0);
  }

  int var_;
  std::unordered_map<const Node*, NodePtr> memo_;
};

}  // namespace detail

/// Exact partial derivative with respect to coordinate `var` (zero-based).
inline SmoothExpr diff(const SmoothExpr& e, int var) {
  if (var < 0 || var >= e.ambient_dim()) throw Error(ErrorKind::Invalid, "derivative variable out of range");
  detail::Differentiator d(var);
  return {e.ambient_dim(), d.diff(e.root())};
}

/// An ordered list of smooth functions sharing one ambient dimension.
class ExprVec {
 public:
  ExprVec() = default;

  ExprVec(int ambient_dim, std::vector<SmoothExpr> components)
      : dim_(ambient_dim),
        components_(std::move(components)),
        cache_(std::make_shared<detail::ProgramCache>()) {
    for (const auto& c : components_) {
      if (c.ambient_dim() != dim_) {
        throw Error(ErrorKind::Invalid, "ExprVec components must share the ambient dimension");
      }
      roots_.push_back(c.root());
    }
  }

  static ExprVec identity(int dim) {
    std::vector<SmoothExpr> comps;
    for (int i = 0; i < dim; ++i) comps.push_back(SmoothExpr::variable(dim, i));
    return {dim, std::move(comps)};
  }

  static ExprVec zero(int ambient_dim, int target_dim) {
    return {ambient_dim, std::vector<SmoothExpr>(static_cast<std::size_t>(target_dim),
                                                 SmoothExpr::constant(ambient_dim, 0.0))};
  }

  int ambient_dim() const { return dim_; }
  int target_dim() const { return static_cast<int>(components_.size()); }
  const SmoothExpr& operator[](int i) const { return components_[static_cast<std::size_t>(i)]; }
  const std::vector<SmoothExpr>& components() const { return components_; }

  Point operator()(const Point& x) const {
    check_point(x);
    const auto& prog = program();
    detail::Evaluator ev(prog, x, false);
    Point out(target_dim());
    for (int i = 0; i < target_dim(); ++i) out[i] = ev.value(prog.roots[static_cast<std::size_t>(i)]);
    return out;
  }

  /// Value and Jacobian (target_dim x ambient_dim) in one sweep.
  std::pair<Point, Matrix> value_and_jacobian(const Point& x) const {
    check_point(x);
    const auto& prog = program();
    detail::Evaluator ev(prog, x, true);
    Point val(target_dim());
    Matrix jac(target_dim(), dim_);
    for (int i = 0; i < target_dim(); ++i) {
      const int r = prog.roots[static_cast<std::size_t>(i)];
      val[i] = ev.value(r);
      jac.row(i) = Eigen::Map<const Eigen::RowVectorXd>(ev.gradient(r), dim_);
    }
    return {val, jac};
  }

  Matrix jacobian(const Point& x) const { return value_and_jacobian(x).second; }

  /// Row i is the gradient of component i, as expressions.
  std::vector<ExprVec> derivative_rows() const {
    std::vector<ExprVec> rows;
    for (const auto& c : components_) {
      std::vector<SmoothExpr> partials;
      for (int v = 0; v < dim_; ++v) partials.push_back(diff(c, v));
      rows.emplace_back(dim_, std::move(partials));
    }
    return rows;
  }

 private:
  void check_point(const Point& x) const {
    if (x.size() != dim_) {
      throw Error(ErrorKind::Invalid, "point has dimension " + std::to_string(x.size()) +
                                          ", map expects " + std::to_string(dim_));
    }
  }

  const detail::Program& program() const { return cache_->get(roots_); }

  int dim_ = 0;
  std::vector<SmoothExpr> components_;
  std::vector<NodePtr> roots_;
  std::shared_ptr<detail::ProgramCache> cache_ = std::make_shared<detail::ProgramCache>();
};

inline double eval(const SmoothExpr& e, const Point& x) { return e(x); }
inline Point eval(const ExprVec& f, const Point& x) { return f(x); }
inline Matrix jacobian(const ExprVec& f, const Point& x) { return f.jacobian(x); }

/// Render in the parser's grammar where possible; internal derivative nodes
/// use descriptive names that the parser does not accept.
inline std::string to_string(const SmoothExpr& e) {
  std::function<std::string(const NodePtr&)> show = [&](const NodePtr& n) -> std::string {
    std::ostringstream os;
    os.precision(17);
    switch (n->op) {
      case Op::Var: os << "x" << n->index + 1; break;
      case Op::Const:
        if (n->value < 0) os << "(0 - " << -n->value << ")";
        else os << n->value;
        break;
      case Op::Sum:
        os << "(";
        for (std::size_t i = 0; i < n->args.size(); ++i) os << (i ? " + " : "") << show(n->args[i]);
        os << ")";
        break;
      case Op::Product:
        os << "(";
        for (std::size_t i = 0; i < n->args.size(); ++i) os << (i ? " * " : "") << show(n->args[i]);
        os << ")";
        break;
      case Op::Quotient: os << "(" << show(n->args[0]) << " / " << show(n->args[1]) << ")"; break;
      case Op::Power: os << "(" << show(n->args[0]) << ")^" << n->index; break;
      case Op::Exp: os << "exp(" << show(n->args[0]) << ")"; break;
      case Op::Sin: os << "sin(" << show(n->args[0]) << ")"; break;
      case Op::Cos: os << "cos(" << show(n->args[0]) << ")"; break;
      case Op::Atan: os << "atan(" << show(n->args[0]) << ")"; break;
      case Op::Sqrt: os << "sqrt(" << show(n->args[0]) << ")"; break;
      case Op::Bump: os << "bump(" << show(n->args[0]) << "; " << n->bump.a << ", " << n->bump.b << ")"; break;
      case Op::BumpTerm:
        os << "bumpterm[" << n->bump.a << "," << n->bump.b << ";" << n->bump.p << n->bump.q << n->bump.j
           << n->bump.k << "](" << show(n->args[0]) << ")";
        break;
      case Op::FlatExp:
        if (n->index == 0) os << "flatexp(" << show(n->args[0]) << ")";
        else os << "flatexp" << n->index << "(" << show(n->args[0]) << ")";
        break;
      case Op::Mask: os << "mask(" << show(n->args[0]) << ", " << show(n->args[1]) << ")"; break;
    }
    return os.str();
  };
  return show(e.root());
}

}  // namespace subcart
