#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <utility>
#include <vector>

#include "dmin/tensor.hpp"

namespace dmin {

using NodeId = std::uint32_t;

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  NodeId id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

enum class OpKind : std::uint8_t {
  Leaf,
  MatVec,
  Add,
  Sub,
  Mul,
  Scale,
  ScaleConst,
  Squash,
  Tanh,
  Exp,
  Softmax,
  Dot,
  Pccs,
  Cosine,
  Concat,
  Element,
  Row,
  Sum,
  CrossEntropy,
  ProjectColumns,
};

const char* op_name(OpKind op);

// Adjoints produced by Tape::backward, indexed by node id.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<Tensor> adjoints) : adjoints_(std::move(adjoints)) {}

  // Gradient of the root with respect to `v`; zeros if `v` does not
  // influence the root.
  Tensor of(Var v) const;
  std::size_t size() const { return adjoints_.size(); }

 private:
  std::vector<Tensor> adjoints_;
};

// Append-only record of forward operations. Node ids are assigned in
// creation order, so inputs always precede their consumers.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Records a leaf. Leaves with requires_grad=false are constants.
  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var parameter(Tensor value) { return leaf(std::move(value), true); }

  const Tensor& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  OpKind kind(NodeId id) const { return nodes_[id].op; }
  std::vector<NodeId> inputs(NodeId id) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].needs_grad; }

  // Reverse sweep from a scalar root. Visits node ids root..0 once each.
  Gradients backward(Var root) const;

  // Used by the op functions in ops.hpp; not meant for direct use.
  struct Record {
    OpKind op = OpKind::Leaf;
    std::array<NodeId, 2> in{};
    std::vector<NodeId> extra;
    std::size_t in_count = 0;
    double constant = 0.0;
    std::size_t index = 0;
    std::vector<std::pair<std::size_t, double>> sparse;
  };
  Var push(Record record, Tensor value);
  void check_owned(Var v, const char* op) const;

 private:
  struct Node {
    OpKind op = OpKind::Leaf;
    std::array<NodeId, 2> in{};
    std::vector<NodeId> extra;
    std::uint32_t in_count = 0;
    bool needs_grad = false;
    double constant = 0.0;
    std::size_t index = 0;
    std::vector<std::pair<std::size_t, double>> sparse;
    Tensor value;

    NodeId input(std::size_t k) const { return k < 2 ? in[k] : extra[k - 2]; }
  };

  void backprop_node(const Node& node, const Tensor& g, std::vector<Tensor>& adj) const;

  std::deque<Node> nodes_;  // stable addresses: value() references survive push()
};

}  // namespace dmin
