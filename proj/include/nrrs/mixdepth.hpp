#pragma once

#include "nrrs/rrs.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace nrrs {

/// How a probe outcome collapses to the scalar the search minimizes.
/// RelMseTime is an inverse efficiency (error times cost); RelMseOnly ignores
/// timing so tests and scripted searches are machine-independent.
enum class ScoreMode {
    RelMseTime,
    RelMseOnly,
};

/// What one probe render reports back to the search.
struct ProbeOutcome {
    double relmse = 0.0;
    uint64_t rays = 0;
    double seconds = 0.0;
};

/// Renders one probe frame for the given assignment and measures it. Probes
/// must hold seeds fixed across assignments so score differences reflect the
/// strategy choice, not sampling noise.
using ProbeFn = std::function<ProbeOutcome(const DepthAssignment &)>;

struct SearchLogRow {
    DepthAssignment assignment;
    double score = 0.0;
    uint64_t rays = 0;
    double seconds = 0.0;
};

struct SearchOptions {
    int max_depth = 6;       // B, the assignment length
    int segment_depth = 6;   // T_d, first-segment width of heuristic_search
    uint64_t brute_cap = 729;  // combination cap for brute_force_search
    ScoreMode score = ScoreMode::RelMseTime;
    std::string log_path;    // when set, the probe log is written here as CSV
};

struct SearchResult {
    DepthAssignment best;
    double best_score = 0.0;
    uint64_t probes = 0;
    std::vector<SearchLogRow> log;
};

double probe_score(const ProbeOutcome &outcome, ScoreMode mode);

/// Tries every |strategies|^B combination in lexicographic candidate order
/// and returns the argmin score; ties keep the earliest (lexicographically
/// smallest) assignment. Errors when the combination count exceeds
/// opt.brute_cap, directing the caller to heuristic_search.
SearchResult brute_force_search(std::span<const Strategy> strategies, const ProbeFn &probe,
                                const SearchOptions &opt);

/// Segmented search: entries start as fixed RR 1.0, then segments of width
/// T_d (the last takes the remainder) are brute-forced front to back with
/// everything outside the active segment frozen. Probe count is the sum of
/// |strategies|^width over the segments, e.g. 3^6 + 3^4 = 810 for B=10,
/// T_d=6, three candidates.
SearchResult heuristic_search(std::span<const Strategy> strategies, const ProbeFn &probe,
                              const SearchOptions &opt);

}  // namespace nrrs
