#include "dmin/ops.hpp"

#include <cmath>
#include <string>

#include "dmin/errors.hpp"

namespace dmin {

namespace {

Tape& owner(Var v, const char* op) {
  if (!v.valid()) throw Error(std::string(op) + ": unrecorded variable");
  return *v.tape();
}

Tape& owner(Var a, Var b, const char* op) {
  Tape& t = owner(a, op);
  t.check_owned(b, op);
  return t;
}

Tape::Record unary(OpKind op, Var a) {
  Tape::Record r;
  r.op = op;
  r.in = {a.id(), 0};
  r.in_count = 1;
  return r;
}

Tape::Record binary(OpKind op, Var a, Var b) {
  Tape::Record r;
  r.op = op;
  r.in = {a.id(), b.id()};
  r.in_count = 2;
  return r;
}

Tape::Record nary(OpKind op, std::span<const Var> parts) {
  Tape::Record r;
  r.op = op;
  r.in_count = parts.size();
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k < 2) {
      r.in[k] = parts[k].id();
    } else {
      r.extra.push_back(parts[k].id());
    }
  }
  return r;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

void require_vector(const Tensor& a, const char* op) {
  if (a.rank() != 1) throw ShapeError(std::string(op) + ": expected a vector, got " + a.shape_string());
}

}  // namespace

Var matvec(Var w, Var x) {
  Tape& t = owner(w, x, "matvec");
  return t.push(binary(OpKind::MatVec, w, x), matvec(w.value(), x.value()));
}

Var add(Var a, Var b) {
  Tape& t = owner(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return t.push(binary(OpKind::Add, a, b), std::move(y));
}

Var sub(Var a, Var b) {
  Tape& t = owner(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return t.push(binary(OpKind::Sub, a, b), std::move(y));
}

Var mul(Var a, Var b) {
  Tape& t = owner(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return t.push(binary(OpKind::Mul, a, b), std::move(y));
}

Var scale(Var a, Var s) {
  Tape& t = owner(a, s, "scale");
  if (!s.value().is_scalar()) throw ShapeError("scale: factor must be a scalar, got " + s.value().shape_string());
  const double f = s.value()[0];
  Tensor y = a.value();
  for (double& v : y.data()) v *= f;
  return t.push(binary(OpKind::Scale, a, s), std::move(y));
}

Var scale(Var a, double c) {
  Tape& t = owner(a, "scale");
  Tensor y = a.value();
  for (double& v : y.data()) v *= c;
  Tape::Record r = unary(OpKind::ScaleConst, a);
  r.constant = c;
  return t.push(std::move(r), std::move(y));
}

Var squash(Var x) {
  Tape& t = owner(x, "squash");
  require_vector(x.value(), "squash");
  return t.push(unary(OpKind::Squash, x), squash(x.value()));
}

Var tanh(Var x) {
  Tape& t = owner(x, "tanh");
  Tensor y = x.value();
  for (double& v : y.data()) v = std::tanh(v);
  return t.push(unary(OpKind::Tanh, x), std::move(y));
}

Var exp(Var x) {
  Tape& t = owner(x, "exp");
  Tensor y = x.value();
  for (double& v : y.data()) v = std::exp(v);
  return t.push(unary(OpKind::Exp, x), std::move(y));
}

Var softmax(Var x) {
  Tape& t = owner(x, "softmax");
  require_vector(x.value(), "softmax");
  return t.push(unary(OpKind::Softmax, x), softmax(x.value()));
}

Var dot(Var a, Var b) {
  Tape& t = owner(a, b, "dot");
  require_same_shape(a.value(), b.value(), "dot");
  return t.push(binary(OpKind::Dot, a, b), Tensor::scalar(dot(a.value().data(), b.value().data())));
}

Var pccs(Var a, Var b) {
  Tape& t = owner(a, b, "pccs");
  return t.push(binary(OpKind::Pccs, a, b), Tensor::scalar(pccs(a.value(), b.value())));
}

Var cosine(Var a, Var b) {
  Tape& t = owner(a, b, "cosine");
  return t.push(binary(OpKind::Cosine, a, b), Tensor::scalar(cosine(a.value(), b.value())));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& t = owner(parts[0], "concat");
  std::vector<double> out;
  for (Var p : parts) {
    t.check_owned(p, "concat");
    require_vector(p.value(), "concat");
    out.insert(out.end(), p.value().data().begin(), p.value().data().end());
  }
  return t.push(nary(OpKind::Concat, parts), Tensor::vector(std::move(out)));
}

Var element(Var x, std::size_t i) {
  Tape& t = owner(x, "element");
  if (i >= x.value().size()) {
    throw ShapeError("element: index " + std::to_string(i) + " out of range for " + x.value().shape_string());
  }
  Tape::Record r = unary(OpKind::Element, x);
  r.index = i;
  return t.push(std::move(r), Tensor::scalar(x.value()[i]));
}

Var row(Var m, std::size_t r) {
  Tape& t = owner(m, "row");
  const Tensor& mv = m.value();
  if (mv.rank() != 2 || r >= mv.rows()) {
    throw ShapeError("row: index " + std::to_string(r) + " out of range for " + mv.shape_string());
  }
  auto src = mv.row(r);
  Tape::Record rec = unary(OpKind::Row, m);
  rec.index = r;
  return t.push(std::move(rec), Tensor::vector(std::vector<double>(src.begin(), src.end())));
}

Var sum(std::span<const Var> terms) {
  if (terms.empty()) throw ShapeError("sum: no inputs");
  Tape& t = owner(terms[0], "sum");
  Tensor y = terms[0].value();
  for (std::size_t k = 1; k < terms.size(); ++k) {
    t.check_owned(terms[k], "sum");
    require_same_shape(y, terms[k].value(), "sum");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += terms[k].value()[i];
  }
  return t.push(nary(OpKind::Sum, terms), std::move(y));
}

Var mean(std::span<const Var> terms) {
  return scale(sum(terms), 1.0 / static_cast<double>(terms.size()));
}

Var cross_entropy(Var scores, std::size_t label) {
  Tape& t = owner(scores, "cross_entropy");
  const Tensor& s = scores.value();
  require_vector(s, "cross_entropy");
  if (label >= s.size()) {
    throw ConfigError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                      std::to_string(s.size()) + " classes");
  }
  std::size_t top = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > s[top]) top = i;
  }
  // log-sum-exp with the max term pulled out: log(1 + rest) keeps precision
  // when one score dominates.
  double rest = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != top) rest += std::exp(s[i] - s[top]);
  }
  Tape::Record r = unary(OpKind::CrossEntropy, scores);
  r.index = label;
  return t.push(std::move(r), Tensor::scalar((s[top] - s[label]) + std::log1p(rest)));
}

Var project_columns(Var p, std::vector<std::pair<std::size_t, double>> columns) {
  Tape& t = owner(p, "project_columns");
  const Tensor& pv = p.value();
  if (pv.rank() != 2) throw ShapeError("project_columns: expected a matrix, got " + pv.shape_string());
  Tensor y = Tensor::zeros(pv.rows());
  for (const auto& [col, weight] : columns) {
    if (col >= pv.cols()) throw ShapeError("project_columns: column out of range");
    for (std::size_t r = 0; r < pv.rows(); ++r) y[r] += weight * pv(r, col);
  }
  Tape::Record rec = unary(OpKind::ProjectColumns, p);
  rec.sparse = std::move(columns);
  return t.push(std::move(rec), std::move(y));
}

}  // namespace dmin
