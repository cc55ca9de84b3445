#include "allocplan/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace allocplan {

namespace {

// Validate a simplex vector and renormalize so entries sum to exactly 1:
// divide by the sum, then absorb the remaining rounding gap into the
// largest entry.
std::vector<double> checked_simplex(std::vector<double> v, bool strictly_positive,
                                    const char* what) {
    if (v.empty()) {
        throw std::invalid_argument(std::string(what) + ": needs at least one group");
    }
    double sum = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument(std::string(what) + ": non-finite entry");
        }
        if (x < 0.0 || (strictly_positive && x == 0.0)) {
            throw std::invalid_argument(std::string(what) +
                                        (strictly_positive ? ": entries must be > 0"
                                                           : ": entries must be >= 0"));
        }
        sum += x;
    }
    if (std::fabs(sum - 1.0) > kSimplexTolerance) {
        throw std::invalid_argument(std::string(what) + ": entries must sum to 1");
    }
    for (double& x : v) x /= sum;
    double resum = 0.0;
    for (double x : v) resum += x;
    auto largest = std::max_element(v.begin(), v.end());
    *largest += 1.0 - resum;
    return v;
}

} // namespace

Allocation::Allocation(std::vector<double> weights)
    : weights_(checked_simplex(std::move(weights), false, "Allocation")) {}

PopulationSpec::PopulationSpec(std::vector<double> gamma)
    : gamma_(checked_simplex(std::move(gamma), true, "PopulationSpec")) {}

GroupCounts::GroupCounts(std::vector<std::int64_t> counts)
    : n_per_group(std::move(counts)) {
    if (n_per_group.empty()) {
        throw std::invalid_argument("GroupCounts: needs at least one group");
    }
    total_ = 0;
    for (std::int64_t c : n_per_group) {
        if (c < 0) throw std::invalid_argument("GroupCounts: negative count");
        total_ += c;
    }
}

GroupCounts GroupedSample::counts() const {
    std::vector<std::int64_t> per_group(num_groups, 0);
    for (const Record& r : records) {
        if (r.group >= num_groups) {
            throw std::invalid_argument("GroupedSample: record group out of range");
        }
        ++per_group[r.group];
    }
    return GroupCounts(std::move(per_group));
}

Allocation allocation_from_counts(const GroupCounts& counts) {
    if (counts.n() == 0) throw std::invalid_argument("empty sample");
    std::vector<double> w(counts.size());
    const double n = static_cast<double>(counts.n());
    for (GroupId g = 0; g < counts.size(); ++g) {
        w[g] = static_cast<double>(counts[g]) / n;
    }
    return Allocation(std::move(w));
}

CountsWithShortfall counts_from_allocation(const Allocation& alpha, std::int64_t n) {
    if (n < 0) throw std::invalid_argument("counts_from_allocation: n must be >= 0");
    std::vector<std::int64_t> per_group(alpha.size(), 0);
    std::int64_t assigned = 0;
    for (GroupId g = 0; g < alpha.size(); ++g) {
        // floor(alpha_g * n), nudged to absorb binary representation error in
        // exact products such as 0.3 * 1000.
        const double x = alpha[g] * static_cast<double>(n);
        const double nudge = std::max(1e-9, x * 4.0 * std::numeric_limits<double>::epsilon());
        per_group[g] = static_cast<std::int64_t>(std::floor(x + nudge));
        assigned += per_group[g];
    }
    CountsWithShortfall out;
    out.counts = GroupCounts(std::move(per_group));
    out.shortfall = n - assigned;
    return out;
}

GroupedSample sample_from_allocation(const std::vector<GroupGenerator>& generators,
                                     const Allocation& alpha, std::int64_t n,
                                     std::uint64_t seed) {
    if (generators.size() != alpha.size()) {
        throw std::invalid_argument("sample_from_allocation: one generator per group required");
    }
    const GroupCounts counts = counts_from_allocation(alpha, n).counts;
    GroupedSample sample;
    sample.num_groups = alpha.size();
    sample.records.reserve(static_cast<std::size_t>(counts.n()));
    RngStream root(seed);
    for (GroupId g = 0; g < counts.size(); ++g) {
        if (counts[g] == 0) continue;
        if (!generators[g]) {
            throw std::invalid_argument("sample_from_allocation: no generator for group " +
                                        std::to_string(g));
        }
        RngStream stream = root.substream(g);
        for (std::int64_t i = 0; i < counts[g]; ++i) {
            Record r = generators[g](stream);
            r.group = g;
            sample.records.push_back(std::move(r));
        }
    }
    return sample;
}

} // namespace allocplan
