// Core domain types: group indices, simplex vectors (allocations and
// population prevalences), per-group sample counts, and grouped samples.
// All types are immutable values and safe to share across threads.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "allocplan/rng.hpp"

namespace allocplan {

/// Dense group index in [0, |G|). External string labels are mapped to
/// indices at the CLI boundary only.
using GroupId = std::size_t;

/// Tolerance for accepting a vector as lying on the simplex. Inputs within
/// the tolerance are renormalized so the stored entries sum to exactly 1.
inline constexpr double kSimplexTolerance = 1e-9;

/// Point on the group simplex: relative proportion of each group in a
/// training set. Entries are non-negative and sum to exactly 1.
class Allocation {
public:
    explicit Allocation(std::vector<double> weights);

    const std::vector<double>& weights() const { return weights_; }
    double operator[](GroupId g) const { return weights_[g]; }
    std::size_t size() const { return weights_.size(); }

private:
    std::vector<double> weights_;
};

/// Population prevalences gamma: like Allocation but with strictly positive
/// entries (every group exists in the population).
class PopulationSpec {
public:
    explicit PopulationSpec(std::vector<double> gamma);

    const std::vector<double>& gamma() const { return gamma_; }
    double operator[](GroupId g) const { return gamma_[g]; }
    std::size_t size() const { return gamma_.size(); }

private:
    std::vector<double> gamma_;
};

/// Integer per-group sample counts with cached total.
struct GroupCounts {
    std::vector<std::int64_t> n_per_group;

    GroupCounts() = default;
    explicit GroupCounts(std::vector<std::int64_t> counts);

    std::int64_t n() const { return total_; }
    std::int64_t operator[](GroupId g) const { return n_per_group[g]; }
    std::size_t size() const { return n_per_group.size(); }

    bool operator==(const GroupCounts& other) const {
        return n_per_group == other.n_per_group;
    }

private:
    std::int64_t total_ = 0;
};

/// Result of flooring fractional allocations: counts plus the number of
/// samples lost to rounding (at most |G| - 1).
struct CountsWithShortfall {
    GroupCounts counts;
    std::int64_t shortfall = 0;
};

/// One labeled record with its group membership.
struct Record {
    std::vector<double> features;
    double label = 0.0;
    GroupId group = 0;
};

/// Training set S = {x_i, y_i, g_i} with a known number of groups.
struct GroupedSample {
    std::size_t num_groups = 0;
    std::vector<Record> records;

    GroupCounts counts() const;
};

/// Draws one record from a group's data distribution using the given stream.
using GroupGenerator = std::function<Record(RngStream&)>;

/// alpha_g = n_g / n. Throws std::invalid_argument("empty sample") when the
/// total count is zero.
Allocation allocation_from_counts(const GroupCounts& counts);

/// n_g = floor(alpha_g * n) per group, with the total shortfall reported.
CountsWithShortfall counts_from_allocation(const Allocation& alpha, std::int64_t n);

/// Independent per-group i.i.d. sampling and concatenation: group g
/// contributes exactly counts_from_allocation(alpha, n) records, drawn from
/// generators[g] on a per-group substream of `seed`. Deterministic in
/// (generators, alpha, n, seed).
GroupedSample sample_from_allocation(const std::vector<GroupGenerator>& generators,
                                     const Allocation& alpha, std::int64_t n,
                                     std::uint64_t seed);

} // namespace allocplan
