#pragma once

#include "armada/util.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace armada {

// ---------------------------------------------------------------------------
// Pipeline / Stage / Task containment model.
//
// An application is a set of concurrent pipelines; a pipeline is an ordered
// list of stages; a stage is a set of tasks with no mutual ordering. All
// values here are plain data, copied freely between components; mutation is
// by producing updated records, never in place.
// ---------------------------------------------------------------------------

enum class TaskState { Described, Scheduled, Submitted, Executing, Done, Failed, Canceled };

// Stages and pipelines share one lifecycle enum.
enum class RunState { Described, Scheduled, Executing, Done, Failed };

inline const char* to_string(TaskState s) {
    switch (s) {
        case TaskState::Described: return "DESCRIBED";
        case TaskState::Scheduled: return "SCHEDULED";
        case TaskState::Submitted: return "SUBMITTED";
        case TaskState::Executing: return "EXECUTING";
        case TaskState::Done: return "DONE";
        case TaskState::Failed: return "FAILED";
        case TaskState::Canceled: return "CANCELED";
    }
    return "?";
}

inline const char* to_string(RunState s) {
    switch (s) {
        case RunState::Described: return "DESCRIBED";
        case RunState::Scheduled: return "SCHEDULED";
        case RunState::Executing: return "EXECUTING";
        case RunState::Done: return "DONE";
        case RunState::Failed: return "FAILED";
    }
    return "?";
}

inline TaskState task_state_from_string(std::string_view s) {
    if (s == "DESCRIBED") return TaskState::Described;
    if (s == "SCHEDULED") return TaskState::Scheduled;
    if (s == "SUBMITTED") return TaskState::Submitted;
    if (s == "EXECUTING") return TaskState::Executing;
    if (s == "DONE") return TaskState::Done;
    if (s == "FAILED") return TaskState::Failed;
    if (s == "CANCELED") return TaskState::Canceled;
    throw Error("BadState", "unknown task state '" + std::string(s) + "'");
}

inline RunState run_state_from_string(std::string_view s) {
    if (s == "DESCRIBED") return RunState::Described;
    if (s == "SCHEDULED") return RunState::Scheduled;
    if (s == "EXECUTING") return RunState::Executing;
    if (s == "DONE") return RunState::Done;
    if (s == "FAILED") return RunState::Failed;
    throw Error("BadState", "unknown state '" + std::string(s) + "'");
}

inline bool is_terminal(TaskState s) {
    return s == TaskState::Done || s == TaskState::Failed || s == TaskState::Canceled;
}

inline bool is_terminal(RunState s) { return s == RunState::Done || s == RunState::Failed; }

struct StagingDirective {
    enum class Mode { Copy, Link, Move };
    std::string source;
    std::string destination;
    Mode mode = Mode::Copy;
};

inline const char* to_string(StagingDirective::Mode m) {
    switch (m) {
        case StagingDirective::Mode::Copy: return "copy";
        case StagingDirective::Mode::Link: return "link";
        case StagingDirective::Mode::Move: return "move";
    }
    return "?";
}

inline StagingDirective::Mode staging_mode_from_string(std::string_view s) {
    if (s == "copy") return StagingDirective::Mode::Copy;
    if (s == "link") return StagingDirective::Mode::Link;
    if (s == "move") return StagingDirective::Mode::Move;
    throw Error("BadStagingMode", "unknown staging mode '" + std::string(s) + "'");
}

struct TaskDescription {
    std::string uid;
    std::string executable;
    std::vector<std::string> arguments;
    int cores = 1;
    std::optional<double> expected_duration;  // seconds; required by the simulated backend
    std::vector<StagingDirective> input_staging;
    std::vector<StagingDirective> output_staging;
    std::map<std::string, std::string> environment;
    bool is_branch_point = false;
};

struct TaskRecord {
    TaskDescription description;
    TaskState state = TaskState::Described;
    int attempts = 0;  // execution attempts started; bumped on DESCRIBED -> SCHEDULED
    std::optional<int> exit_code;
    std::string failure_reason;               // set alongside FAILED
    std::optional<double> finished_at_sim;    // virtual completion time (simulated runs)
    std::map<TaskState, double> timestamps;   // state -> monotonic seconds of last entry

    const std::string& uid() const { return description.uid; }
};

struct Stage {
    std::string uid;
    std::vector<TaskRecord> tasks;
    RunState state = RunState::Described;
    std::map<RunState, double> timestamps;
};

struct Pipeline {
    std::string uid;
    std::vector<Stage> stages;
    std::size_t current_stage = 0;
    RunState state = RunState::Described;
    std::map<RunState, double> timestamps;
};

struct AppDescription {
    std::string name = "app";
    std::vector<Pipeline> pipelines;
};

// ---------------------------------------------------------------------------
// State graphs
// ---------------------------------------------------------------------------

class IllegalTransition : public Error {
public:
    IllegalTransition(const std::string& uid, const std::string& from, const std::string& to)
        : Error("IllegalTransition", uid + ": " + from + " -> " + to) {}
};

// Task graph. FAILED -> DESCRIBED exists only through resubmit_reset below;
// the plain transition rejects it.
inline bool task_transition_allowed(TaskState from, TaskState to) {
    using T = TaskState;
    switch (from) {
        case T::Described: return to == T::Scheduled || to == T::Canceled;
        case T::Scheduled: return to == T::Submitted || to == T::Failed || to == T::Canceled;
        case T::Submitted:
            return to == T::Executing || to == T::Done || to == T::Failed || to == T::Canceled;
        case T::Executing: return to == T::Done || to == T::Failed || to == T::Canceled;
        case T::Done:
        case T::Failed:
        case T::Canceled: return false;
    }
    return false;
}

inline bool run_transition_allowed(RunState from, RunState to) {
    using R = RunState;
    switch (from) {
        case R::Described:
            // DESCRIBED -> DONE covers stages fully skipped by a branch decision.
            return to == R::Scheduled || to == R::Done || to == R::Failed;
        case R::Scheduled: return to == R::Executing || to == R::Done || to == R::Failed;
        case R::Executing: return to == R::Done || to == R::Failed;
        case R::Done:
        case R::Failed: return false;
    }
    return false;
}

// A stage may close as DONE once every task has completed or been skipped by
// a branch decision; it closes as FAILED once every task is terminal and at
// least one failure is permanent.
inline bool stage_may_complete(const Stage& st) {
    if (st.tasks.empty()) return false;
    return std::all_of(st.tasks.begin(), st.tasks.end(), [](const TaskRecord& t) {
        return t.state == TaskState::Done || t.state == TaskState::Canceled;
    });
}

inline bool stage_settled(const Stage& st) {
    if (st.tasks.empty()) return false;
    return std::all_of(st.tasks.begin(), st.tasks.end(),
                       [](const TaskRecord& t) { return is_terminal(t.state); });
}

inline bool stage_may_fail(const Stage& st) {
    return stage_settled(st) && std::any_of(st.tasks.begin(), st.tasks.end(), [](const TaskRecord& t) {
               return t.state == TaskState::Failed;
           });
}

inline bool pipeline_may_complete(const Pipeline& p) {
    if (p.stages.empty()) return false;
    return std::all_of(p.stages.begin(), p.stages.end(),
                       [](const Stage& s) { return s.state == RunState::Done; });
}

inline TaskRecord transition(TaskRecord r, TaskState next, double now) {
    if (!task_transition_allowed(r.state, next))
        throw IllegalTransition(r.uid(), to_string(r.state), to_string(next));
    if (r.state == TaskState::Described && next == TaskState::Scheduled) ++r.attempts;
    r.state = next;
    r.timestamps[next] = now;
    return r;
}

inline Stage transition(Stage s, RunState next, double now) {
    if (!run_transition_allowed(s.state, next))
        throw IllegalTransition(s.uid, to_string(s.state), to_string(next));
    if (next == RunState::Done && !stage_may_complete(s))
        throw IllegalTransition(s.uid, to_string(s.state), "DONE (tasks incomplete)");
    if (next == RunState::Failed && !stage_may_fail(s))
        throw IllegalTransition(s.uid, to_string(s.state), "FAILED (no permanent failure)");
    s.state = next;
    s.timestamps[next] = now;
    return s;
}

inline Pipeline transition(Pipeline p, RunState next, double now) {
    if (!run_transition_allowed(p.state, next))
        throw IllegalTransition(p.uid, to_string(p.state), to_string(next));
    if (next == RunState::Done && !pipeline_may_complete(p))
        throw IllegalTransition(p.uid, to_string(p.state), "DONE (stages incomplete)");
    p.state = next;
    p.timestamps[next] = now;
    return p;
}

// The one sanctioned path from FAILED back to DESCRIBED. Attempt count is
// preserved; the next DESCRIBED -> SCHEDULED hop increments it.
inline TaskRecord resubmit_reset(TaskRecord r, double now) {
    if (r.state != TaskState::Failed)
        throw IllegalTransition(r.uid(), to_string(r.state), "DESCRIBED (resubmission)");
    r.state = TaskState::Described;
    r.exit_code.reset();
    r.failure_reason.clear();
    r.timestamps[TaskState::Described] = now;
    return r;
}

// current_stage is derived: the first stage that is not DONE (the last index
// once every stage is DONE). It therefore advances by exactly one as stages
// complete in order.
inline void refresh_current_stage(Pipeline& p) {
    std::size_t i = 0;
    while (i < p.stages.size() && p.stages[i].state == RunState::Done) ++i;
    p.current_stage = std::min(i, p.stages.empty() ? std::size_t(0) : p.stages.size() - 1);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
    enum class Code { DuplicateUid, EmptyStage, EmptyPipeline, InvalidCores, EmptyExecutable };
    Code code;
    std::string uid;
    std::string detail;
};

inline const char* to_string(Violation::Code c) {
    switch (c) {
        case Violation::Code::DuplicateUid: return "DuplicateUid";
        case Violation::Code::EmptyStage: return "EmptyStage";
        case Violation::Code::EmptyPipeline: return "EmptyPipeline";
        case Violation::Code::InvalidCores: return "InvalidCores";
        case Violation::Code::EmptyExecutable: return "EmptyExecutable";
    }
    return "?";
}

struct ValidationResult {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }

    std::string summary() const {
        std::string out;
        for (const auto& v : violations) {
            out += std::string(to_string(v.code)) + "(" + v.uid + ")";
            if (!v.detail.empty()) out += ": " + v.detail;
            out += "\n";
        }
        return out;
    }
};

// Fill in any uids the caller left empty: <app>.<p>, <app>.<p>.<s>,
// <app>.<p>.<s>.<t>.
inline void assign_uids(AppDescription& app) {
    for (std::size_t pi = 0; pi < app.pipelines.size(); ++pi) {
        auto& p = app.pipelines[pi];
        if (p.uid.empty()) p.uid = app.name + "." + std::to_string(pi);
        for (std::size_t si = 0; si < p.stages.size(); ++si) {
            auto& s = p.stages[si];
            if (s.uid.empty()) s.uid = p.uid + "." + std::to_string(si);
            for (std::size_t ti = 0; ti < s.tasks.size(); ++ti) {
                auto& t = s.tasks[ti];
                if (t.description.uid.empty())
                    t.description.uid = s.uid + "." + std::to_string(ti);
            }
        }
    }
}

// Reports every violation, not just the first.
inline ValidationResult validate_application(const AppDescription& app) {
    ValidationResult res;
    auto add = [&](Violation::Code c, const std::string& uid, std::string detail = "") {
        res.violations.push_back({c, uid, std::move(detail)});
    };

    if (app.pipelines.empty()) {
        add(Violation::Code::EmptyPipeline, app.name, "application has no pipelines");
        return res;
    }

    std::set<std::string> seen;
    auto check_uid = [&](const std::string& uid) {
        if (!seen.insert(uid).second) add(Violation::Code::DuplicateUid, uid);
    };

    for (const auto& p : app.pipelines) {
        check_uid(p.uid);
        if (p.stages.empty()) add(Violation::Code::EmptyPipeline, p.uid, "pipeline has no stages");
        for (const auto& s : p.stages) {
            check_uid(s.uid);
            if (s.tasks.empty()) add(Violation::Code::EmptyStage, s.uid);
            for (const auto& t : s.tasks) {
                check_uid(t.uid());
                if (t.description.cores < 1)
                    add(Violation::Code::InvalidCores, t.uid(),
                        "cores = " + std::to_string(t.description.cores));
                if (t.description.executable.empty())
                    add(Violation::Code::EmptyExecutable, t.uid());
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Ready set
// ---------------------------------------------------------------------------

// Exactly the DESCRIBED tasks whose stage is the current stage of a
// non-terminal pipeline. Pipelines are concurrent, so tasks from several
// pipelines may be returned together. Order is deterministic: pipeline
// order, then task order within the stage.
inline std::vector<std::string> next_ready_tasks(const AppDescription& app) {
    std::vector<std::string> ready;
    for (const auto& p : app.pipelines) {
        if (is_terminal(p.state)) continue;
        if (p.current_stage >= p.stages.size()) continue;
        const Stage& st = p.stages[p.current_stage];
        if (is_terminal(st.state)) continue;
        for (const auto& t : st.tasks)
            if (t.state == TaskState::Described) ready.push_back(t.uid());
    }
    return ready;
}

// ---------------------------------------------------------------------------
// Lookup helpers shared by the engine components
// ---------------------------------------------------------------------------

struct TaskLocator {
    std::size_t pipeline = 0;
    std::size_t stage = 0;
    std::size_t task = 0;
};

inline TaskRecord* find_task(AppDescription& app, const std::string& uid, TaskLocator* loc = nullptr) {
    for (std::size_t pi = 0; pi < app.pipelines.size(); ++pi)
        for (std::size_t si = 0; si < app.pipelines[pi].stages.size(); ++si)
            for (std::size_t ti = 0; ti < app.pipelines[pi].stages[si].tasks.size(); ++ti) {
                auto& t = app.pipelines[pi].stages[si].tasks[ti];
                if (t.uid() == uid) {
                    if (loc) *loc = {pi, si, ti};
                    return &t;
                }
            }
    return nullptr;
}

inline Stage* find_stage(AppDescription& app, const std::string& uid, std::size_t* pipeline_idx = nullptr) {
    for (std::size_t pi = 0; pi < app.pipelines.size(); ++pi)
        for (auto& s : app.pipelines[pi].stages)
            if (s.uid == uid) {
                if (pipeline_idx) *pipeline_idx = pi;
                return &s;
            }
    return nullptr;
}

inline Pipeline* find_pipeline(AppDescription& app, const std::string& uid) {
    for (auto& p : app.pipelines)
        if (p.uid == uid) return &p;
    return nullptr;
}

inline bool app_terminal(const AppDescription& app) {
    return std::all_of(app.pipelines.begin(), app.pipelines.end(),
                       [](const Pipeline& p) { return is_terminal(p.state); });
}

inline int count_tasks(const AppDescription& app, TaskState s) {
    int n = 0;
    for (const auto& p : app.pipelines)
        for (const auto& st : p.stages)
            for (const auto& t : st.tasks)
                if (t.state == s) ++n;
    return n;
}

inline int total_tasks(const AppDescription& app) {
    int n = 0;
    for (const auto& p : app.pipelines)
        for (const auto& st : p.stages) n += int(st.tasks.size());
    return n;
}

inline int max_task_cores(const AppDescription& app) {
    int m = 0;
    for (const auto& p : app.pipelines)
        for (const auto& st : p.stages)
            for (const auto& t : st.tasks) m = std::max(m, t.description.cores);
    return m;
}

}  // namespace armada
