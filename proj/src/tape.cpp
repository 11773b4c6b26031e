#include "dmin/tape.hpp"

#include <cmath>
#include <string>

#include "dmin/errors.hpp"

namespace dmin {

const Tensor& Var::value() const { return tape_->value(*this); }

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatVec: return "matvec";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::ScaleConst: return "scale_const";
    case OpKind::Squash: return "squash";
    case OpKind::Tanh: return "tanh";
    case OpKind::Exp: return "exp";
    case OpKind::Softmax: return "softmax";
    case OpKind::Dot: return "dot";
    case OpKind::Pccs: return "pccs";
    case OpKind::Cosine: return "cosine";
    case OpKind::Concat: return "concat";
    case OpKind::Element: return "element";
    case OpKind::Row: return "row";
    case OpKind::Sum: return "sum";
    case OpKind::CrossEntropy: return "cross_entropy";
    case OpKind::ProjectColumns: return "project_columns";
  }
  return "?";
}

Tensor Gradients::of(Var v) const {
  if (v.id() < adjoints_.size() && !adjoints_[v.id()].empty()) return adjoints_[v.id()];
  return Tensor::zeros_like(v.value());
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("leaf: non-finite value");
  Node node;
  node.op = OpKind::Leaf;
  node.needs_grad = requires_grad;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

const Tensor& Tape::value(Var v) const {
  check_owned(v, "value");
  return nodes_[v.id()].value;
}

std::vector<NodeId> Tape::inputs(NodeId id) const {
  const Node& n = nodes_.at(id);
  std::vector<NodeId> out;
  for (std::size_t k = 0; k < n.in_count; ++k) out.push_back(n.input(k));
  return out;
}

void Tape::check_owned(Var v, const char* op) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw ConfigError(std::string(op) + ": variable is not recorded on this tape");
  }
}

Var Tape::push(Record record, Tensor value) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op_name(record.op)) + ": produced a non-finite value");
  }
  Node node;
  node.op = record.op;
  node.in = record.in;
  node.extra = std::move(record.extra);
  node.in_count = static_cast<std::uint32_t>(record.in_count);
  node.constant = record.constant;
  node.index = record.index;
  node.sparse = std::move(record.sparse);
  node.value = std::move(value);
  for (std::size_t k = 0; k < node.in_count; ++k) {
    if (nodes_[node.input(k)].needs_grad) {
      node.needs_grad = true;
      break;
    }
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

Gradients Tape::backward(Var root) const {
  check_owned(root, "backward");
  if (!nodes_[root.id()].value.is_scalar()) {
    throw ShapeError("backward: root must be a scalar, got shape " +
                     nodes_[root.id()].value.shape_string());
  }
  std::vector<Tensor> adj(root.id() + 1);
  adj[root.id()] = Tensor::scalar(1.0);
  for (std::size_t k = root.id() + 1; k-- > 0;) {
    const Node& node = nodes_[k];
    if (adj[k].empty() || !node.needs_grad || node.op == OpKind::Leaf) continue;
    backprop_node(node, adj[k], adj);
  }
  return Gradients(std::move(adj));
}

namespace {

Tensor& slot(std::vector<Tensor>& adj, NodeId id, const Tensor& like) {
  if (adj[id].empty()) adj[id] = Tensor::zeros_like(like);
  return adj[id];
}

}  // namespace

void Tape::backprop_node(const Node& node, const Tensor& g, std::vector<Tensor>& adj) const {
  auto wants = [&](std::size_t k) { return nodes_[node.input(k)].needs_grad; };
  auto in_value = [&](std::size_t k) -> const Tensor& { return nodes_[node.input(k)].value; };
  auto grad_of = [&](std::size_t k) -> Tensor& {
    return slot(adj, node.input(k), nodes_[node.input(k)].value);
  };
  const Tensor& y = node.value;

  switch (node.op) {
    case OpKind::Leaf:
      break;

    case OpKind::MatVec: {
      const Tensor& w = in_value(0);
      const Tensor& x = in_value(1);
      if (wants(0)) {
        Tensor& gw = grad_of(0);
        for (std::size_t r = 0; r < w.rows(); ++r) {
          auto row = gw.row(r);
          for (std::size_t c = 0; c < w.cols(); ++c) row[c] += g[r] * x[c];
        }
      }
      if (wants(1)) {
        Tensor& gx = grad_of(1);
        for (std::size_t r = 0; r < w.rows(); ++r) {
          auto row = w.row(r);
          for (std::size_t c = 0; c < w.cols(); ++c) gx[c] += g[r] * row[c];
        }
      }
      break;
    }

    case OpKind::Add:
    case OpKind::Sub: {
      const double sign = node.op == OpKind::Add ? 1.0 : -1.0;
      if (wants(0)) {
        Tensor& ga = grad_of(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        Tensor& gb = grad_of(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      }
      break;
    }

    case OpKind::Mul: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      if (wants(0)) {
        Tensor& ga = grad_of(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (wants(1)) {
        Tensor& gb = grad_of(1);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      break;
    }

    case OpKind::Scale: {
      const Tensor& a = in_value(0);
      const double s = in_value(1)[0];
      if (wants(0)) {
        Tensor& ga = grad_of(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
      }
      if (wants(1)) grad_of(1)[0] += dot(g.data(), a.data());
      break;
    }

    case OpKind::ScaleConst: {
      Tensor& ga = grad_of(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += node.constant * g[i];
      break;
    }

    case OpKind::Squash: {
      // y = f(n) x with f(n) = n / (1 + n^2)
      // dy/dx = f I + (f'(n) / n) x x^T,  f'(n) = (1 - n^2) / (1 + n^2)^2
      const Tensor& x = in_value(0);
      const double n = l2_norm(x.data());
      const double denom = 1.0 + n * n;
      const double f = n / denom;
      Tensor& gx = grad_of(0);
      if (n == 0.0) break;
      const double k = (1.0 - n * n) / (denom * denom) / n * dot(x.data(), g.data());
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] += f * g[i] + k * x[i];
      break;
    }

    case OpKind::Tanh: {
      Tensor& gx = grad_of(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }

    case OpKind::Exp: {
      Tensor& gx = grad_of(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
      break;
    }

    case OpKind::Softmax: {
      const double gy = dot(g.data(), y.data());
      Tensor& gx = grad_of(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += y[i] * (g[i] - gy);
      break;
    }

    case OpKind::Dot: {
      const double gs = g[0];
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      if (wants(0)) {
        Tensor& ga = grad_of(0);
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += gs * b[i];
      }
      if (wants(1)) {
        Tensor& gb = grad_of(1);
        for (std::size_t i = 0; i < b.size(); ++i) gb[i] += gs * a[i];
      }
      break;
    }

    case OpKind::Pccs: {
      // r = <a~, b~> / (|a~| |b~|) on mean-centred inputs. The gradient with
      // respect to a~ has zero mean already, so the centring projection is a
      // no-op on it.
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      const std::size_t n = a.size();
      double ma = 0.0, mb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
      }
      ma /= static_cast<double>(n);
      mb /= static_cast<double>(n);
      std::vector<double> ca(n), cb(n);
      for (std::size_t i = 0; i < n; ++i) {
        ca[i] = a[i] - ma;
        cb[i] = b[i] - mb;
      }
      const double na = l2_norm(ca);
      const double nb = l2_norm(cb);
      if (na <= kEpsilon || nb <= kEpsilon) break;
      const double r = dot(ca, cb) / (na * nb);
      const double gs = g[0];
      if (wants(0)) {
        Tensor& ga = grad_of(0);
        for (std::size_t i = 0; i < n; ++i) ga[i] += gs * (cb[i] / (na * nb) - r * ca[i] / (na * na));
      }
      if (wants(1)) {
        Tensor& gb = grad_of(1);
        for (std::size_t i = 0; i < n; ++i) gb[i] += gs * (ca[i] / (na * nb) - r * cb[i] / (nb * nb));
      }
      break;
    }

    case OpKind::Cosine: {
      // c = <a, b> / (max(|a|, eps) max(|b|, eps))
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      const double na = l2_norm(a.data());
      const double nb = l2_norm(b.data());
      if (na == 0.0 || nb == 0.0) break;
      const double da = std::max(na, kEpsilon);
      const double db = std::max(nb, kEpsilon);
      const double c = dot(a.data(), b.data()) / (da * db);
      const double gs = g[0];
      if (wants(0)) {
        Tensor& ga = grad_of(0);
        const double shrink = na > kEpsilon ? c / (na * na) : 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += gs * (b[i] / (da * db) - shrink * a[i]);
      }
      if (wants(1)) {
        Tensor& gb = grad_of(1);
        const double shrink = nb > kEpsilon ? c / (nb * nb) : 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) gb[i] += gs * (a[i] / (da * db) - shrink * b[i]);
      }
      break;
    }

    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.in_count; ++k) {
        const std::size_t len = in_value(k).size();
        if (wants(k)) {
          Tensor& gk = grad_of(k);
          for (std::size_t i = 0; i < len; ++i) gk[i] += g[offset + i];
        }
        offset += len;
      }
      break;
    }

    case OpKind::Element:
      grad_of(0)[node.index] += g[0];
      break;

    case OpKind::Row: {
      auto r = grad_of(0).row(node.index);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] += g[i];
      break;
    }

    case OpKind::Sum: {
      for (std::size_t k = 0; k < node.in_count; ++k) {
        if (!wants(k)) continue;
        Tensor& gk = grad_of(k);
        for (std::size_t i = 0; i < g.size(); ++i) gk[i] += g[i];
      }
      break;
    }

    case OpKind::CrossEntropy: {
      Tensor p = softmax(in_value(0));
      p[node.index] -= 1.0;
      Tensor& gs = grad_of(0);
      for (std::size_t i = 0; i < p.size(); ++i) gs[i] += g[0] * p[i];
      break;
    }

    case OpKind::ProjectColumns: {
      Tensor& gp = grad_of(0);
      const std::size_t cols = gp.cols();
      for (const auto& [col, weight] : node.sparse) {
        for (std::size_t r = 0; r < gp.rows(); ++r) gp[r * cols + col] += weight * g[r];
      }
      break;
    }
  }
}

}  // namespace dmin
