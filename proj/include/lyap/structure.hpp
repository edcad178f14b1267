#pragma once

#include "lyap/family.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace lyap {

struct UndecidedWithinBudget : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Boolean nonzero patterns. Structure questions depend only on which entries
// are nonzero, and an entry counts as zero iff it is exactly 0.0: the zeros
// are part of the user's model, not numerics, so no epsilon is applied.
// ---------------------------------------------------------------------------

class BoolPattern {
 public:
  BoolPattern() = default;
  explicit BoolPattern(int d) : d_(d), words_((d + 63) / 64), bits_(std::size_t(d) * words_, 0) {}

  template <class Scalar>
  static BoolPattern from_matrix(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a) {
    BoolPattern p(static_cast<int>(a.rows()));
    for (int i = 0; i < p.d_; ++i)
      for (int j = 0; j < p.d_; ++j)
        if (a(i, j) != Scalar(0)) p.set(i, j);
    return p;
  }

  int dim() const { return d_; }
  void set(int i, int j) { bits_[row_off(i) + j / 64] |= std::uint64_t{1} << (j % 64); }
  bool get(int i, int j) const {
    return (bits_[row_off(i) + j / 64] >> (j % 64)) & 1u;
  }

  // boolean product: out(i,j) = OR_l this(i,l) & rhs(l,j)
  BoolPattern multiply(const BoolPattern& rhs) const {
    BoolPattern out(d_);
    for (int i = 0; i < d_; ++i) {
      const std::size_t oi = out.row_off(i);
      for (int l = 0; l < d_; ++l) {
        if (!get(i, l)) continue;
        const std::size_t rl = rhs.row_off(l);
        for (int w = 0; w < words_; ++w) out.bits_[oi + w] |= rhs.bits_[rl + w];
      }
    }
    return out;
  }

  bool all_positive() const {
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j)
        if (!get(i, j)) return false;
    return true;
  }

  bool rows_equal(int i, int j) const {
    for (int w = 0; w < words_; ++w)
      if (bits_[row_off(i) + w] != bits_[row_off(j) + w]) return false;
    return true;
  }

  const std::vector<std::uint64_t>& raw() const { return bits_; }
  bool operator==(const BoolPattern& o) const { return d_ == o.d_ && bits_ == o.bits_; }

 private:
  std::size_t row_off(int i) const { return std::size_t(i) * words_; }
  int d_ = 0;
  int words_ = 0;
  std::vector<std::uint64_t> bits_;
};

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

/// Partition of {0..d-1} into classes on which every family member acts as a
/// permutation: the columns of A_j indexed by classes[l] have their nonzero
/// rows inside classes[perms[j][l]].
struct PartitionStructure {
  std::vector<std::vector<int>> classes;
  std::vector<std::vector<int>> perms;  // perms[j][l] = image class of l under A_j
};

/// Witness word for a strictly positive product, in product order:
/// A[word[0]] * ... * A[word[k-1]] > 0 entrywise.
struct PositiveProduct {
  std::vector<int> word;
};

using PositivityResult = std::variant<PositiveProduct, PartitionStructure>;

struct ConditionBReport {
  std::vector<bool> has_zero_row;  // per matrix
  std::vector<bool> has_zero_col;
  bool condition_b = false;
};

struct ReducibilityReport {
  bool reducible = false;
  std::vector<int> invariant_set;  // nonempty iff reducible
};

struct BlockTriangularization {
  // permuted(a,b) = original(permutation[a], permutation[b]) is block
  // upper-triangular for every family member, with irreducible diagonal
  // blocks listed in `blocks` as index ranges into `permutation`.
  std::vector<int> permutation;
  std::vector<std::vector<int>> blocks;  // original indices per diagonal block
};

struct StructureReport {
  std::vector<bool> has_zero_row;
  std::vector<bool> has_zero_col;
  bool condition_b = false;
  bool reducible = false;
  std::vector<int> invariant_set;               // iff reducible
  std::optional<BlockTriangularization> block;  // iff reducible
  std::optional<PositivityResult> positivity;   // iff irreducible and condition_b
  bool positivity_undecided = false;            // pattern budget exhausted
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

namespace detail {

template <class Scalar>
void require_nonnegative(const MatrixFamilyT<Scalar>& fam) {
  if (!fam.is_nonnegative()) throw std::invalid_argument("family is not nonnegative");
}

// Union digraph with an edge i -> j iff some member maps e_i onto a vector
// supported at j, i.e. A(j,i) > 0. A vertex set closed under out-edges spans
// a coordinate subspace invariant for every member; transpose the family to
// get the row-oriented convention.
template <class Scalar>
std::vector<std::vector<int>> union_digraph(const MatrixFamilyT<Scalar>& fam) {
  const int d = static_cast<int>(fam.dim);
  std::vector<std::vector<int>> adj(d);
  for (int i = 0; i < d; ++i) {
    std::vector<bool> seen(d, false);
    for (const auto& a : fam.matrices)
      for (int j = 0; j < d; ++j)
        if (a(j, i) != Scalar(0)) seen[j] = true;
    for (int j = 0; j < d; ++j)
      if (seen[j]) adj[i].push_back(j);
  }
  return adj;
}

// Tarjan; emits components sinks-first (each component only after everything
// reachable from it), which is exactly the diagonal-block order that makes
// the permuted matrices block upper-triangular.
inline std::vector<std::vector<int>> strongly_connected_components(
    const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> index(n, -1), low(n, 0), stack;
  std::vector<bool> on_stack(n, false);
  std::vector<std::vector<int>> comps;
  int counter = 0;

  struct Frame {
    int v;
    std::size_t next;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> frames{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.next < adj[f.v].size()) {
        const int w = adj[f.v][f.next++];
        if (index[w] == -1) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
      } else {
        if (low[f.v] == index[f.v]) {
          std::vector<int> comp;
          int w;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            comp.push_back(w);
          } while (w != f.v);
          std::sort(comp.begin(), comp.end());
          comps.push_back(std::move(comp));
        }
        const int v = f.v;
        frames.pop_back();
        if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      }
    }
  }
  return comps;
}

}  // namespace detail

/// True iff every matrix has a strictly positive entry in every row and every
/// column. Requires a nonnegative family.
template <class Scalar>
ConditionBReport check_condition_b(const MatrixFamilyT<Scalar>& fam) {
  detail::require_nonnegative(fam);
  ConditionBReport rep;
  rep.condition_b = true;
  for (const auto& a : fam.matrices) {
    bool zr = false, zc = false;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if ((a.row(i).array() == Scalar(0)).all()) zr = true;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if ((a.col(j).array() == Scalar(0)).all()) zc = true;
    rep.has_zero_row.push_back(zr);
    rep.has_zero_col.push_back(zc);
    if (zr || zc) rep.condition_b = false;
  }
  return rep;
}

/// A family is reducible iff the union digraph is not strongly connected.
/// The returned invariant set S is closed under out-edges, so the subspace
/// spanned by { e_i : i in S } is invariant for every member.
template <class Scalar>
ReducibilityReport is_reducible(const MatrixFamilyT<Scalar>& fam) {
  detail::require_nonnegative(fam);
  const auto adj = detail::union_digraph(fam);
  const auto comps = detail::strongly_connected_components(adj);
  ReducibilityReport rep;
  rep.reducible = comps.size() > 1;
  if (rep.reducible) rep.invariant_set = comps.front();  // sink component
  return rep;
}

/// Simultaneous block upper-triangular form with irreducible diagonal blocks:
/// the condensation of the union digraph, sinks first.
template <class Scalar>
BlockTriangularization block_triangularize(const MatrixFamilyT<Scalar>& fam) {
  detail::require_nonnegative(fam);
  const auto adj = detail::union_digraph(fam);
  BlockTriangularization out;
  out.blocks = detail::strongly_connected_components(adj);
  for (const auto& comp : out.blocks)
    out.permutation.insert(out.permutation.end(), comp.begin(), comp.end());
  return out;
}

namespace detail {

// Interprets an all-or-nothing block pattern as a candidate partition:
// reflexive, and any two related indices have identical rows.
inline std::optional<std::vector<std::vector<int>>> equivalence_classes(
    const BoolPattern& p) {
  const int d = p.dim();
  for (int i = 0; i < d; ++i)
    if (!p.get(i, i)) return std::nullopt;
  std::vector<int> cls(d, -1);
  std::vector<std::vector<int>> classes;
  for (int i = 0; i < d; ++i) {
    if (cls[i] != -1) continue;
    const int id = static_cast<int>(classes.size());
    classes.push_back({});
    for (int j = 0; j < d; ++j) {
      if (p.get(i, j)) {
        if (cls[j] != -1 || !p.rows_equal(i, j)) return std::nullopt;
        cls[j] = id;
        classes[id].push_back(j);
      } else if (p.get(j, i)) {
        return std::nullopt;  // not symmetric
      }
    }
  }
  return classes;
}

// Computes the class permutations for a candidate partition, or nullopt if
// some member fails to map classes onto classes bijectively.
template <class Scalar>
std::optional<std::vector<std::vector<int>>> class_permutations(
    const MatrixFamilyT<Scalar>& fam, const std::vector<std::vector<int>>& classes) {
  const int d = static_cast<int>(fam.dim);
  const int r = static_cast<int>(classes.size());
  std::vector<int> cls(d, -1);
  for (int l = 0; l < r; ++l)
    for (int i : classes[l]) cls[i] = l;
  std::vector<std::vector<int>> perms;
  for (const auto& a : fam.matrices) {
    std::vector<int> sigma(r, -1);
    for (int l = 0; l < r; ++l) {
      for (int c : classes[l]) {
        int target = -1;
        for (int i = 0; i < d; ++i) {
          if (a(i, c) == Scalar(0)) continue;
          if (target == -1) target = cls[i];
          else if (cls[i] != target) return std::nullopt;  // column straddles classes
        }
        if (target == -1) return std::nullopt;  // zero column
        if (sigma[l] == -1) sigma[l] = target;
        else if (sigma[l] != target) return std::nullopt;  // class splits
      }
    }
    std::vector<bool> hit(r, false);
    for (int l = 0; l < r; ++l) {
      if (sigma[l] < 0 || hit[sigma[l]]) return std::nullopt;
      hit[sigma[l]] = true;
    }
    perms.push_back(std::move(sigma));
  }
  return perms;
}

}  // namespace detail

/// Structural soundness of a partition for a family; used before any
/// tilde-alpha arithmetic.
template <class Scalar>
bool partition_is_valid(const MatrixFamilyT<Scalar>& fam, const PartitionStructure& ps) {
  std::vector<bool> covered(fam.dim, false);
  for (const auto& cl : ps.classes)
    for (int i : cl) {
      if (i < 0 || i >= fam.dim || covered[i]) return false;
      covered[i] = true;
    }
  for (bool c : covered)
    if (!c) return false;
  const auto perms = detail::class_permutations(fam, ps.classes);
  if (!perms) return false;
  return *perms == ps.perms;
}

/// Decides, for an irreducible nonnegative family with no zero rows or
/// columns, whether some product is strictly positive or the index set splits
/// into classes permuted by every member. Works by breadth-first closure over
/// the boolean patterns of products, which is finite; the budget bounds the
/// number of distinct patterns explored and exceeding it raises
/// UndecidedWithinBudget rather than guessing.
template <class Scalar>
PositivityResult positive_product_or_partition(const MatrixFamilyT<Scalar>& fam,
                                               std::uint64_t max_pattern_states = 200000) {
  detail::require_nonnegative(fam);
  if (!check_condition_b(fam).condition_b)
    throw std::invalid_argument("positivity dichotomy requires no zero rows or columns");
  if (is_reducible(fam).reducible)
    throw std::invalid_argument("positivity dichotomy requires an irreducible family");

  std::vector<BoolPattern> gens;
  for (const auto& a : fam.matrices) gens.push_back(BoolPattern::from_matrix(a));

  std::set<std::vector<std::uint64_t>> visited;
  std::deque<std::pair<BoolPattern, std::vector<int>>> queue;
  // candidate partitions discovered along the way
  std::vector<std::vector<std::vector<int>>> candidates;

  auto admit = [&](BoolPattern p, std::vector<int> word) -> std::optional<PositiveProduct> {
    if (!visited.insert(p.raw()).second) return std::nullopt;
    if (p.all_positive()) return PositiveProduct{std::move(word)};
    if (auto classes = detail::equivalence_classes(p)) candidates.push_back(std::move(*classes));
    queue.emplace_back(std::move(p), std::move(word));
    return std::nullopt;
  };

  for (int j = 0; j < fam.size(); ++j)
    if (auto hit = admit(gens[j], {j})) return *hit;

  while (!queue.empty()) {
    auto [p, word] = std::move(queue.front());
    queue.pop_front();
    for (int j = 0; j < fam.size(); ++j) {
      if (visited.size() >= max_pattern_states)
        throw UndecidedWithinBudget("undecided within budget: more than " +
                                    std::to_string(max_pattern_states) +
                                    " distinct product patterns");
      auto next_word = word;
      next_word.push_back(j);
      if (auto hit = admit(p.multiply(gens[j]), std::move(next_word))) return *hit;
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.size() < b.size(); });
  for (const auto& classes : candidates) {
    if (classes.size() < 2) continue;
    if (auto perms = detail::class_permutations(fam, classes))
      return PartitionStructure{classes, std::move(*perms)};
  }
  throw std::logic_error(
      "pattern closure exhausted without a positive product or a permutation "
      "partition; preconditions violated?");
}

/// Full classification pass; positivity is only attempted for irreducible
/// families with no zero rows or columns.
template <class Scalar>
StructureReport classify(const MatrixFamilyT<Scalar>& fam,
                         std::uint64_t max_pattern_states = 200000) {
  StructureReport rep;
  const ConditionBReport cb = check_condition_b(fam);
  rep.has_zero_row = cb.has_zero_row;
  rep.has_zero_col = cb.has_zero_col;
  rep.condition_b = cb.condition_b;
  const ReducibilityReport red = is_reducible(fam);
  rep.reducible = red.reducible;
  if (red.reducible) {
    rep.invariant_set = red.invariant_set;
    rep.block = block_triangularize(fam);
  } else if (cb.condition_b) {
    try {
      rep.positivity = positive_product_or_partition(fam, max_pattern_states);
    } catch (const UndecidedWithinBudget&) {
      rep.positivity_undecided = true;
    }
  }
  return rep;
}

}  // namespace lyap
