#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dmin/tape.hpp"

// Taped operations. Every function records one node on the tape that owns its
// inputs; all inputs must live on the same tape.
namespace dmin {

Var matvec(Var w, Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);               // elementwise
Var scale(Var a, Var s);             // s is a scalar node
Var scale(Var a, double c);
Var squash(Var x);
Var tanh(Var x);                     // elementwise
Var exp(Var x);                      // elementwise
Var softmax(Var x);
Var dot(Var a, Var b);
Var pccs(Var a, Var b);
Var cosine(Var a, Var b);
Var concat(std::span<const Var> parts);
Var element(Var x, std::size_t i);
Var row(Var m, std::size_t r);
Var sum(std::span<const Var> terms);  // all terms share one shape
Var mean(std::span<const Var> terms);

// -log softmax(scores)[label]
Var cross_entropy(Var scores, std::size_t label);

// y = sum_k w_k * P[:, k] over the given (column, weight) pairs.
Var project_columns(Var p, std::vector<std::pair<std::size_t, double>> columns);

}  // namespace dmin
