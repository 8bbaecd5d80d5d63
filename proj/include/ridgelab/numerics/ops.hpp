#pragma once

#include <span>
#include <vector>

#include "ridgelab/numerics/tape.hpp"

// Differentiable primitives. Every op validates shapes and throws
// ContractViolation on mismatch. All operands must live on the same tape.
namespace ridgelab::ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
// x + row, with `row` (1 x cols) broadcast over every row of x.
Var add_row(Var x, Var row);
// x * s where s is a 1x1 node.
Var scale(Var x, Var s);
Var row_softmax(Var x);
Var layer_normalize(Var x, Var gain, Var shift);
Var exp(Var x);
Var log(Var x);
Var gelu(Var x);
// Sum of all entries, as a 1x1 node.
Var sum(Var x);
// out.row(i) = table.row(ids[i]); gradient scatters back into the table.
Var gather_rows(Var table, std::span<const int> ids);

// Multi-head causal self-attention over a stack of equal-length sequences.
// `qkv` is (n_seq * seq_len) x (3 * d): queries, keys, values side by side,
// each split into `n_heads` contiguous column groups. Returns the
// (n_seq * seq_len) x d head outputs (before the output projection). When
// `probs` is non-null it receives n_seq * n_heads row-stochastic seq_len x
// seq_len matrices, index seq * n_heads + head.
Var causal_attention(Var qkv, int n_heads, int seq_len, std::vector<Matrix>* probs = nullptr);

// Mean negative log-likelihood of `targets` under row-softmax(logits).
Var cross_entropy(Var logits, std::span<const int> targets);

}  // namespace ridgelab::ad
