#pragma once

#include "nrrs/rrs.hpp"

#include <cstdint>
#include <string>

namespace nrrs {

/// One benchmark run: scene, strategy assignment, budgets, and output
/// destinations. Every field can be set from a key=value config file or a
/// CLI flag of the same (hyphenated) name; flags override the file.
struct RunConfig {
    std::string scene = "cornell";    // builtin name or scene file path
    std::string strategy = "fixed:1"; // single strategy or comma list, one per depth
    int max_depth = 6;                // B: vertices live at depths 1..B
    int width = 160;
    int height = 90;
    uint64_t seed = 0;
    int train_iters = 128;         // training-phase frames (adaptive strategies)
    float warmup_fraction = 0.2f;  // leading fraction of training in warmup phase
    float lr_stat = 0.005f;        // StatNet Adam learning rate
    float lr_rrs = 0.0003f;        // RRSNet Adam learning rate
    int render_iters = 32;         // rendering-phase frames; 0 = ray cap only
    uint64_t ray_cap = 0;          // stop rendering once total rays reach this; 0 = off
    float f_rate = 0.85f;
    bool rate_control = true;
    uint32_t queue_capacity = 0;  // 0 = default Npx + ceil(Npx/8)
    int threads = 0;              // 0 = NRRS_THREADS or hardware concurrency
    std::string out_dir = "out";
    std::string reference;          // reference PFM path; empty = out_dir/reference.pfm
    int reference_iters = 1024;     // budget used when the reference must be generated
    std::string checkpoint_in;      // load network weights before running
    std::string checkpoint_out;     // save network weights after training
    bool deterministic = false;     // zero wall times in CSVs, RelMSE-only probe scores
    std::string candidates = "nrrs,adrrs-nn,fixed:1";  // search candidate strategies
    int segment_depth = 6;                             // T_d for heuristic_search
    uint64_t brute_cap = 729;
    std::string search_mode = "auto";  // auto | brute | heuristic
    bool score_time = true;           // probe score = RelMSE * seconds (else RelMSE)
};

/// Sets one field by its config key ("max-depth", "train-iters", ...).
/// Throws on unknown keys or unparseable values.
void apply_config_entry(RunConfig &cfg, const std::string &key, const std::string &value);

/// Applies a key=value file ('#' comments, blank lines, surrounding spaces
/// allowed). Throws on unreadable files or malformed lines.
void load_config_file(RunConfig &cfg, const std::string &path);

/// Enforces the run invariants: resolution at least 8x8, positive budgets
/// (a rendering budget is iterations or a ray cap), depth at least 1,
/// warmup fraction in [0, 1], f_rate in (0, 1].
void validate_config(const RunConfig &cfg);

/// Expands a strategy spec to one strategy per depth: a single name applies
/// to all depths, a comma list must have exactly max_depth entries.
DepthAssignment parse_assignment_spec(const std::string &spec, int max_depth);

/// File-system-safe method name: characters outside [A-Za-z0-9.-] become '_'.
std::string sanitize_method_name(const std::string &spec);

}  // namespace nrrs
