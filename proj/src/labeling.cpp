#include "switchcot/labeling.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "switchcot/errors.hpp"
#include "switchcot/eval.hpp"
#include "switchcot/util.hpp"

namespace switchcot {

OutcomeScorer default_scorer() {
    return [](const Question& q, const Outcome& o) { return score_outcome(q, o).correct; };
}

std::optional<LabeledInstance> label_instance(const Question& q, const Outcome& outcome_short,
                                              const Outcome& outcome_long,
                                              const OutcomeScorer& scorer) {
    if (outcome_short.question_id != q.id || outcome_long.question_id != q.id) {
        throw DataError("label_instance: outcomes do not belong to question " + q.id);
    }
    ConfusionCell cell = confusion_cell(scorer(q, outcome_short), scorer(q, outcome_long));
    auto label = cell_to_label(cell);
    if (!label) return std::nullopt;
    LabeledInstance inst;
    inst.question_id = q.id;
    inst.label = *label;
    inst.provenance = Provenance::instance_based;
    return inst;
}

namespace {

std::vector<std::size_t> id_order(const std::vector<Question>& dataset) {
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return dataset[a].id < dataset[b].id; });
    return idx;
}

// Majority-of-reps execution of one strategy. reps=1 leaves the seed unset
// so the generation shares cache entries with evaluation runs.
struct RepRun {
    bool correct = false;
    std::vector<Outcome> outcomes;
};

RepRun run_with_reps(const Question& q, Strategy s, const std::optional<Budget>& budget,
                     Backend& backend, const PromptTemplates& templates,
                     const LabelingOptions& opts, const OutcomeScorer& scorer) {
    RepRun r;
    int reps = std::max(1, opts.reps);
    int correct_count = 0;
    for (int rep = 0; rep < reps; ++rep) {
        StrategyRunOptions ro;
        ro.model_id = opts.model_id;
        ro.temperature = opts.temperature;
        if (reps > 1) ro.seed = rep;
        Outcome o = run_strategy(q, s, budget, backend, templates, ro);
        if (scorer(q, o)) ++correct_count;
        r.outcomes.push_back(std::move(o));
    }
    r.correct = 2 * correct_count > reps; // strict majority
    return r;
}

} // namespace

LabelingRunResult run_instance_labeling(const std::vector<Question>& dataset, Backend& backend,
                                        const PromptTemplates& templates,
                                        const LabelingOptions& opts) {
    if (dataset.empty()) throw DataError("instance labeling needs a non-empty dataset");
    OutcomeScorer scorer = default_scorer();

    struct Slot {
        std::optional<LabeledInstance> labeled;
        bool discarded = false;
        bool backend_error = false;
        std::vector<Outcome> outcomes;
    };
    std::vector<Slot> slots(dataset.size());

    util::parallel_for(dataset.size(), opts.workers, [&](std::size_t i) {
        const Question& q = dataset[i];
        try {
            RepRun rs = run_with_reps(q, Strategy::short_cot, std::nullopt, backend, templates,
                                      opts, scorer);
            RepRun rl = run_with_reps(q, Strategy::long_cot, std::nullopt, backend, templates,
                                      opts, scorer);
            ConfusionCell cell = confusion_cell(rs.correct, rl.correct);
            if (auto label = cell_to_label(cell)) {
                LabeledInstance inst;
                inst.question_id = q.id;
                inst.label = *label;
                inst.provenance = Provenance::instance_based;
                slots[i].labeled = inst;
            } else {
                slots[i].discarded = true;
            }
            for (auto& o : rs.outcomes) slots[i].outcomes.push_back(std::move(o));
            for (auto& o : rl.outcomes) slots[i].outcomes.push_back(std::move(o));
        } catch (const BackendError&) {
            slots[i].backend_error = true;
        }
    });

    LabelingRunResult result;
    for (std::size_t i : id_order(dataset)) {
        Slot& s = slots[i];
        if (s.backend_error) {
            result.errors.push_back(dataset[i].id);
            continue;
        }
        if (s.labeled) {
            result.labeled.push_back(*s.labeled);
        } else {
            result.discarded.push_back({dataset[i].id, std::nullopt});
        }
        for (auto& o : s.outcomes) result.outcomes.push_back(std::move(o));
    }
    return result;
}

nlohmann::json to_json(const BudgetThreshold& t) {
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& g : t.grid_evaluated) {
        grid.push_back(
            {{"budget", g.budget}, {"acc_short", g.acc_short}, {"acc_long", g.acc_long}});
    }
    return nlohmann::json{{"dataset", t.dataset},
                          {"b_d", t.b_d},
                          {"method", t.method},
                          {"grid_evaluated", std::move(grid)},
                          {"warnings", t.warnings}};
}

BudgetThreshold budget_threshold_from_json(const nlohmann::json& j) {
    BudgetThreshold t;
    try {
        t.dataset = j.at("dataset").get<std::string>();
        t.b_d = j.at("b_d").get<int>();
        t.method = j.at("method").get<std::string>();
        for (const auto& g : j.at("grid_evaluated")) {
            t.grid_evaluated.push_back({g.at("budget").get<int>(),
                                        g.at("acc_short").get<double>(),
                                        g.at("acc_long").get<double>()});
        }
        if (auto it = j.find("warnings"); it != j.end()) {
            t.warnings = it->get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed budget threshold: ") + e.what());
    }
    if (t.b_d <= 0) throw DataError("budget threshold b_d must be positive");
    return t;
}

BudgetThreshold estimate_budget_threshold(const std::vector<Question>& dataset, Backend& backend,
                                          const PromptTemplates& templates,
                                          const std::vector<int>& grid,
                                          const ThresholdOptions& opts) {
    if (grid.size() < 2) throw ConfigError("threshold grid needs at least 2 budgets");
    if (!std::is_sorted(grid.begin(), grid.end())) {
        throw ConfigError("threshold grid must be ascending");
    }
    if (dataset.empty()) throw DataError("threshold estimation needs a non-empty dataset");
    OutcomeScorer scorer = default_scorer();

    BudgetThreshold t;
    std::set<std::string> names;
    for (const auto& q : dataset) names.insert(q.dataset);
    t.dataset = names.size() == 1 ? *names.begin() : "mixed";
    if (long(dataset.size()) < opts.min_sample) {
        t.warnings.push_back("small sample: " + std::to_string(dataset.size()) +
                             " questions, accuracies are noisy below " +
                             std::to_string(opts.min_sample));
    }

    for (int b : grid) {
        if (b < 2) throw ConfigError("grid budgets must be at least 2 tokens");
        Budget budget{b, std::min(opts.answer_reserve, b - 1)};
        struct Cell {
            bool ok = false;
            bool short_correct = false;
            bool long_correct = false;
        };
        std::vector<Cell> cells(dataset.size());
        StrategyRunOptions ro{opts.model_id, opts.temperature, std::nullopt};
        util::parallel_for(dataset.size(), opts.workers, [&](std::size_t i) {
            const Question& q = dataset[i];
            try {
                Outcome os =
                    run_strategy(q, Strategy::short_cot, budget, backend, templates, ro);
                Outcome ol = run_strategy(q, Strategy::long_cot, budget, backend, templates, ro);
                cells[i] = {true, scorer(q, os), scorer(q, ol)};
            } catch (const BackendError&) {
                cells[i].ok = false;
            }
        });
        long n = 0, cs = 0, cl = 0;
        for (const auto& c : cells) {
            if (!c.ok) continue;
            ++n;
            cs += c.short_correct ? 1 : 0;
            cl += c.long_correct ? 1 : 0;
        }
        BudgetThreshold::GridPoint p;
        p.budget = b;
        p.acc_short = n ? double(cs) / double(n) : 0.0;
        p.acc_long = n ? double(cl) / double(n) : 0.0;
        if (n < long(dataset.size())) {
            t.warnings.push_back("budget " + std::to_string(b) + ": " +
                                 std::to_string(long(dataset.size()) - n) +
                                 " items failed in the backend");
        }
        t.grid_evaluated.push_back(p);
    }

    t.method = "no_crossover";
    t.b_d = grid.back();
    for (const auto& p : t.grid_evaluated) {
        if (p.acc_long >= p.acc_short) {
            t.b_d = p.budget;
            t.method = "crossover";
            break;
        }
    }
    return t;
}

SampledBudgets sample_budgets(int b_d, int n, long long seed) {
    if (b_d < 1) throw ConfigError("b_d must be at least 1");
    if (n < 1) throw ConfigError("sample_budgets needs n >= 1");
    util::SplitMix64 rng{uint64_t(seed)};
    std::set<int> values;
    const int available = 2 * b_d; // {1 .. 2*b_d} after zero-replacement
    const int want = std::min(n, available);
    int draws = 0;
    const int draw_limit = std::max(10000, 100 * n);
    while (int(values.size()) < want && draws < draw_limit) {
        int v = int(rng.next_in(0, 2 * int64_t(b_d)));
        if (v == 0) v = 1; // a zero budget is degenerate
        values.insert(v);
        ++draws;
    }
    SampledBudgets out;
    out.budgets.assign(values.begin(), values.end());
    out.shortfall = int(out.budgets.size()) < n;
    return out;
}

std::optional<LabeledInstance> label_budget_aware(const Question& q, int b, Backend& backend,
                                                  const PromptTemplates& templates,
                                                  const OutcomeScorer& scorer,
                                                  const LabelingOptions& opts,
                                                  std::vector<Outcome>* outcomes_out) {
    if (b < 1) throw ConfigError("budget-aware labeling needs b >= 1");
    Budget budget{b, std::max(0, std::min(opts.answer_reserve, b - 1))};
    StrategyRunOptions ro{opts.model_id, opts.temperature, std::nullopt};

    // a budget too small to fit a strategy's fixed prefix means that
    // strategy cannot answer at all under b: incorrect, not an error
    auto attempt = [&](Strategy s) -> bool {
        try {
            Outcome o = run_strategy(q, s, budget, backend, templates, ro);
            bool ok = scorer(q, o);
            if (outcomes_out) outcomes_out->push_back(std::move(o));
            return ok;
        } catch (const ConfigError&) {
            return false;
        }
    };

    bool short_ok = attempt(Strategy::short_cot);
    bool long_ok = attempt(Strategy::long_cot);
    if (!short_ok && !long_ok) return std::nullopt;

    LabeledInstance inst;
    inst.question_id = q.id;
    inst.budget = b;
    inst.provenance = Provenance::budget_aware;
    inst.label = short_ok ? Strategy::short_cot : Strategy::long_cot;
    return inst;
}

LabelingRunResult run_budget_labeling(const std::vector<Question>& dataset, Backend& backend,
                                      const PromptTemplates& templates, int b_d,
                                      int budgets_per_q, const LabelingOptions& opts) {
    if (dataset.empty()) throw DataError("budget labeling needs a non-empty dataset");
    if (b_d < 1) throw ConfigError("budget labeling needs b_d >= 1");
    if (budgets_per_q < 1) throw ConfigError("budget labeling needs budgets_per_q >= 1");
    OutcomeScorer scorer = default_scorer();

    struct Slot {
        std::vector<LabeledInstance> labeled;
        std::vector<DiscardRecord> discarded;
        std::vector<Outcome> outcomes;
        bool backend_error = false;
        bool shortfall = false;
    };
    std::vector<Slot> slots(dataset.size());

    util::parallel_for(dataset.size(), opts.workers, [&](std::size_t i) {
        const Question& q = dataset[i];
        // the budget list is a deterministic function of (seed, question id)
        uint64_t qseed = util::fnv1a64(q.id, util::fnv1a64("budget-sampling") ^
                                                 uint64_t(opts.seed));
        SampledBudgets sampled = sample_budgets(b_d, budgets_per_q, int64_t(qseed));
        slots[i].shortfall = sampled.shortfall;
        try {
            for (int b : sampled.budgets) {
                auto inst = label_budget_aware(q, b, backend, templates, scorer, opts,
                                               &slots[i].outcomes);
                if (inst) {
                    slots[i].labeled.push_back(*inst);
                } else {
                    slots[i].discarded.push_back({q.id, b});
                }
            }
        } catch (const BackendError&) {
            slots[i].backend_error = true;
            slots[i].labeled.clear();
            slots[i].discarded.clear();
            slots[i].outcomes.clear();
        }
    });

    LabelingRunResult result;
    for (std::size_t i : id_order(dataset)) {
        Slot& s = slots[i];
        if (s.backend_error) {
            result.errors.push_back(dataset[i].id);
            continue;
        }
        for (auto& l : s.labeled) result.labeled.push_back(std::move(l));
        for (auto& d : s.discarded) result.discarded.push_back(std::move(d));
        for (auto& o : s.outcomes) result.outcomes.push_back(std::move(o));
    }
    return result;
}

std::vector<LabeledInstance> build_final_dataset(
    const std::vector<LabeledInstance>& instance_labels,
    const std::vector<LabeledInstance>& budget_labels) {
    std::vector<LabeledInstance> out;
    out.reserve(instance_labels.size() + budget_labels.size());
    std::set<std::pair<std::string, long long>> seen;
    auto add = [&](const LabeledInstance& inst) {
        validate(inst);
        long long key_budget = inst.budget ? *inst.budget : -1;
        if (!seen.emplace(inst.question_id, key_budget).second) {
            std::string b = inst.budget ? std::to_string(*inst.budget) : "none";
            throw DataError("duplicate labeled instance (question_id=" + inst.question_id +
                            ", budget=" + b + ")");
        }
        out.push_back(inst);
    };
    for (const auto& inst : instance_labels) add(inst);
    for (const auto& inst : budget_labels) add(inst);
    return out;
}

} // namespace switchcot
