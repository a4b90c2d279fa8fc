#include "nrrs/mixdepth.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace nrrs {

namespace {

uint64_t combination_count(size_t n_strategies, int width) {
    uint64_t total = 1;
    for (int i = 0; i < width; ++i) {
        if (total > (1ull << 48))
            return std::numeric_limits<uint64_t>::max();
        total *= static_cast<uint64_t>(n_strategies);
    }
    return total;
}

/// Brute-forces assignment entries [begin, end) in lexicographic candidate
/// order, everything outside the segment frozen. On return the assignment
/// carries the winning segment; the winner's score is returned. Ties keep the
/// earliest combination, which is the lexicographically smallest one.
double search_segment(std::span<const Strategy> strategies, const ProbeFn &probe, ScoreMode mode,
                      DepthAssignment &assignment, int begin, int end, SearchResult &result) {
    const int width = end - begin;
    std::vector<size_t> idx(static_cast<size_t>(width), 0);
    std::vector<size_t> best_idx = idx;
    double best = std::numeric_limits<double>::infinity();
    bool have_best = false;
    for (;;) {
        for (int k = 0; k < width; ++k)
            assignment[static_cast<size_t>(begin + k)] = strategies[idx[static_cast<size_t>(k)]];
        const ProbeOutcome outcome = probe(assignment);
        const double score = probe_score(outcome, mode);
        if (!std::isfinite(score))
            fail("mix-depth search: probe returned a non-finite score for assignment " +
                 assignment_name(assignment));
        result.log.push_back({assignment, score, outcome.rays, outcome.seconds});
        result.probes += 1;
        if (!have_best || score < best) {
            best = score;
            best_idx = idx;
            have_best = true;
        }
        // Odometer with the last digit fastest: lexicographic ascending.
        int k = width - 1;
        while (k >= 0 && ++idx[static_cast<size_t>(k)] == strategies.size()) {
            idx[static_cast<size_t>(k)] = 0;
            --k;
        }
        if (k < 0)
            break;
    }
    for (int k = 0; k < width; ++k)
        assignment[static_cast<size_t>(begin + k)] = strategies[best_idx[static_cast<size_t>(k)]];
    return best;
}

void write_search_log(const std::string &path, const std::vector<SearchLogRow> &log) {
    std::ofstream out(path, std::ios::trunc);
    if (!out.good())
        fail("mix-depth search: cannot write log: " + path);
    out << "assignment,score,rays,seconds\n";
    for (const SearchLogRow &row : log)
        out << '"' << assignment_name(row.assignment) << "\"," << row.score << ',' << row.rays
            << ',' << row.seconds << '\n';
}

void check_inputs(std::span<const Strategy> strategies, const ProbeFn &probe,
                  const SearchOptions &opt) {
    if (strategies.empty())
        fail("mix-depth search: empty strategy candidate list");
    if (opt.max_depth < 1)
        fail("mix-depth search: max_depth must be at least 1");
    if (!probe)
        fail("mix-depth search: missing probe function");
}

}  // namespace

double probe_score(const ProbeOutcome &outcome, ScoreMode mode) {
    return mode == ScoreMode::RelMseTime ? outcome.relmse * outcome.seconds : outcome.relmse;
}

SearchResult brute_force_search(std::span<const Strategy> strategies, const ProbeFn &probe,
                                const SearchOptions &opt) {
    check_inputs(strategies, probe, opt);
    const uint64_t combos = combination_count(strategies.size(), opt.max_depth);
    if (combos > opt.brute_cap)
        fail("brute_force_search: " + std::to_string(strategies.size()) + "^" +
             std::to_string(opt.max_depth) + " combinations exceed the cap of " +
             std::to_string(opt.brute_cap) + "; use heuristic_search");

    SearchResult result;
    result.best.assign(static_cast<size_t>(opt.max_depth), strategies[0]);
    result.best_score =
        search_segment(strategies, probe, opt.score, result.best, 0, opt.max_depth, result);
    if (!opt.log_path.empty())
        write_search_log(opt.log_path, result.log);
    return result;
}

SearchResult heuristic_search(std::span<const Strategy> strategies, const ProbeFn &probe,
                              const SearchOptions &opt) {
    check_inputs(strategies, probe, opt);
    if (opt.segment_depth < 1 || opt.segment_depth > opt.max_depth)
        fail("heuristic_search: segment_depth must satisfy 1 <= T_d <= max_depth");

    SearchResult result;
    Strategy fixed_rr;
    fixed_rr.kind = StrategyKind::Fixed;
    fixed_rr.fixed_value = 1.0f;
    result.best.assign(static_cast<size_t>(opt.max_depth), fixed_rr);

    double score = std::numeric_limits<double>::infinity();
    for (int begin = 0; begin < opt.max_depth; begin += opt.segment_depth) {
        const int end = std::min(begin + opt.segment_depth, opt.max_depth);
        score = search_segment(strategies, probe, opt.score, result.best, begin, end, result);
    }
    result.best_score = score;
    if (!opt.log_path.empty())
        write_search_log(opt.log_path, result.log);
    return result;
}

}  // namespace nrrs
