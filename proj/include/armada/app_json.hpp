#pragma once

#include "armada/pst.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace armada {

using nlohmann::json;

class ParseError : public Error {
public:
    explicit ParseError(const std::string& detail) : Error("ParseError", detail) {}
};

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                           const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) { ok = true; break; }
        if (!ok) throw ParseError("unknown field '" + it.key() + "' in " + where);
    }
}

}  // namespace detail

inline json to_json(const StagingDirective& d) {
    return json{{"source", d.source}, {"destination", d.destination}, {"mode", to_string(d.mode)}};
}

inline StagingDirective staging_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": staging directive must be an object");
    detail::reject_unknown(j, {"source", "destination", "mode"}, where);
    StagingDirective d;
    d.source = j.value("source", "");
    d.destination = j.value("destination", "");
    d.mode = staging_mode_from_string(j.value("mode", "copy"));
    if (d.source.empty()) throw ParseError(where + ": staging source must be non-empty");
    return d;
}

// ---------------------------------------------------------------------------
// Application description file. Field names are load-bearing; unknown fields
// are rejected so silent typos cannot drop work.
// ---------------------------------------------------------------------------

inline TaskDescription task_description_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": task must be an object");
    detail::reject_unknown(j,
                           {"uid", "executable", "arguments", "cores", "expected_duration",
                            "input_staging", "output_staging", "environment", "is_branch_point"},
                           where);
    TaskDescription t;
    t.uid = j.value("uid", "");
    if (!j.contains("executable") || !j["executable"].is_string())
        throw ParseError(where + ": 'executable' (string) is required");
    t.executable = j["executable"].get<std::string>();
    if (j.contains("arguments")) {
        if (!j["arguments"].is_array()) throw ParseError(where + ": 'arguments' must be an array");
        for (const auto& a : j["arguments"]) t.arguments.push_back(a.get<std::string>());
    }
    t.cores = j.value("cores", 1);
    if (j.contains("expected_duration")) t.expected_duration = j["expected_duration"].get<double>();
    if (j.contains("input_staging"))
        for (const auto& s : j["input_staging"])
            t.input_staging.push_back(staging_from_json(s, where + ".input_staging"));
    if (j.contains("output_staging"))
        for (const auto& s : j["output_staging"])
            t.output_staging.push_back(staging_from_json(s, where + ".output_staging"));
    if (j.contains("environment")) {
        if (!j["environment"].is_object())
            throw ParseError(where + ": 'environment' must be an object");
        for (auto it = j["environment"].begin(); it != j["environment"].end(); ++it)
            t.environment[it.key()] = it.value().get<std::string>();
    }
    t.is_branch_point = j.value("is_branch_point", false);
    return t;
}

inline AppDescription app_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("application description must be a JSON object");
    detail::reject_unknown(j, {"name", "pipelines"}, "application");
    AppDescription app;
    app.name = j.value("name", "app");
    if (!j.contains("pipelines") || !j["pipelines"].is_array())
        throw ParseError("'pipelines' (array) is required");
    std::size_t pi = 0;
    for (const auto& pj : j["pipelines"]) {
        std::string pwhere = "pipelines[" + std::to_string(pi) + "]";
        if (!pj.is_object()) throw ParseError(pwhere + " must be an object");
        detail::reject_unknown(pj, {"uid", "stages"}, pwhere);
        Pipeline p;
        p.uid = pj.value("uid", "");
        if (!pj.contains("stages") || !pj["stages"].is_array())
            throw ParseError(pwhere + ": 'stages' (array) is required");
        std::size_t si = 0;
        for (const auto& sj : pj["stages"]) {
            std::string swhere = pwhere + ".stages[" + std::to_string(si) + "]";
            if (!sj.is_object()) throw ParseError(swhere + " must be an object");
            detail::reject_unknown(sj, {"uid", "tasks"}, swhere);
            Stage s;
            s.uid = sj.value("uid", "");
            if (!sj.contains("tasks") || !sj["tasks"].is_array())
                throw ParseError(swhere + ": 'tasks' (array) is required");
            std::size_t ti = 0;
            for (const auto& tj : sj["tasks"]) {
                TaskRecord rec;
                rec.description =
                    task_description_from_json(tj, swhere + ".tasks[" + std::to_string(ti) + "]");
                s.tasks.push_back(std::move(rec));
                ++ti;
            }
            p.stages.push_back(std::move(s));
            ++si;
        }
        app.pipelines.push_back(std::move(p));
        ++pi;
    }
    assign_uids(app);
    return app;
}

inline AppDescription load_app_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open application file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("malformed JSON in '" + path + "': " + e.what());
    }
    return app_from_json(j);
}

// ---------------------------------------------------------------------------
// Full-state serialization (descriptions plus runtime state). Key order is
// canonical (nlohmann objects sort keys), so two equal states serialize to
// identical bytes.
// ---------------------------------------------------------------------------

inline json to_json(const TaskDescription& t) {
    json j{{"uid", t.uid},
           {"executable", t.executable},
           {"arguments", t.arguments},
           {"cores", t.cores},
           {"environment", t.environment},
           {"is_branch_point", t.is_branch_point}};
    if (t.expected_duration) j["expected_duration"] = *t.expected_duration;
    json in = json::array(), out = json::array();
    for (const auto& d : t.input_staging) in.push_back(to_json(d));
    for (const auto& d : t.output_staging) out.push_back(to_json(d));
    if (!in.empty()) j["input_staging"] = in;
    if (!out.empty()) j["output_staging"] = out;
    return j;
}

inline json to_json(const TaskRecord& r) {
    json ts = json::object();
    for (const auto& [st, t] : r.timestamps) ts[to_string(st)] = t;
    json j{{"description", to_json(r.description)},
           {"state", to_string(r.state)},
           {"attempts", r.attempts},
           {"timestamps", ts}};
    if (r.exit_code) j["exit_code"] = *r.exit_code;
    if (!r.failure_reason.empty()) j["failure_reason"] = r.failure_reason;
    if (r.finished_at_sim) j["finished_at_sim"] = *r.finished_at_sim;
    return j;
}

inline json to_json(const Stage& s) {
    json tasks = json::array();
    for (const auto& t : s.tasks) tasks.push_back(to_json(t));
    json ts = json::object();
    for (const auto& [st, t] : s.timestamps) ts[to_string(st)] = t;
    return json{{"uid", s.uid}, {"state", to_string(s.state)}, {"tasks", tasks}, {"timestamps", ts}};
}

inline json to_json(const Pipeline& p) {
    json stages = json::array();
    for (const auto& s : p.stages) stages.push_back(to_json(s));
    json ts = json::object();
    for (const auto& [st, t] : p.timestamps) ts[to_string(st)] = t;
    return json{{"uid", p.uid},
                {"state", to_string(p.state)},
                {"current_stage", p.current_stage},
                {"stages", stages},
                {"timestamps", ts}};
}

inline json to_json(const AppDescription& app) {
    json pipelines = json::array();
    for (const auto& p : app.pipelines) pipelines.push_back(to_json(p));
    return json{{"name", app.name}, {"pipelines", pipelines}};
}

inline TaskRecord task_record_from_state_json(const json& j) {
    TaskRecord r;
    r.description = task_description_from_json(j.at("description"), "record");
    r.state = task_state_from_string(j.at("state").get<std::string>());
    r.attempts = j.at("attempts").get<int>();
    if (j.contains("exit_code")) r.exit_code = j["exit_code"].get<int>();
    if (j.contains("failure_reason")) r.failure_reason = j["failure_reason"].get<std::string>();
    if (j.contains("finished_at_sim")) r.finished_at_sim = j["finished_at_sim"].get<double>();
    for (auto it = j.at("timestamps").begin(); it != j.at("timestamps").end(); ++it)
        r.timestamps[task_state_from_string(it.key())] = it.value().get<double>();
    return r;
}

inline AppDescription app_from_state_json(const json& j) {
    AppDescription app;
    app.name = j.at("name").get<std::string>();
    for (const auto& pj : j.at("pipelines")) {
        Pipeline p;
        p.uid = pj.at("uid").get<std::string>();
        p.state = run_state_from_string(pj.at("state").get<std::string>());
        p.current_stage = pj.at("current_stage").get<std::size_t>();
        for (auto it = pj.at("timestamps").begin(); it != pj.at("timestamps").end(); ++it)
            p.timestamps[run_state_from_string(it.key())] = it.value().get<double>();
        for (const auto& sj : pj.at("stages")) {
            Stage s;
            s.uid = sj.at("uid").get<std::string>();
            s.state = run_state_from_string(sj.at("state").get<std::string>());
            for (auto it = sj.at("timestamps").begin(); it != sj.at("timestamps").end(); ++it)
                s.timestamps[run_state_from_string(it.key())] = it.value().get<double>();
            for (const auto& tj : sj.at("tasks")) s.tasks.push_back(task_record_from_state_json(tj));
            p.stages.push_back(std::move(s));
        }
        app.pipelines.push_back(std::move(p));
    }
    return app;
}

}  // namespace armada
