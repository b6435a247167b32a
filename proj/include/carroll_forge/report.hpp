// Machine-readable run reports.  One invocation produces one report: the
// command echo, the sampling parameters, the verdict with its branch label,
// per-identity residual statistics, and any command-specific outputs.  Field
// order is fixed and numbers are snapped to a fixed precision so identical
// runs serialize to identical bytes.

#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "carroll_forge/tolerance.hpp"

namespace carrollforge {

inline constexpr const char* kToolName = "carroll-forge";
inline constexpr const char* kToolVersion = "0.1.0";

// Round-trip through twelve significant digits; keeps the serialized form
// short and byte-stable without disturbing any tolerance comparison.
inline double snap(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

struct Report {
    std::string command;
    std::string spec;
    int samples = 0;
    std::uint64_t seed = 0;
    double tol = tol::kResidual;
    std::optional<bool> verdict;
    std::string branch;
    ResidualMap residuals;
    std::vector<double> factors;
    std::vector<std::pair<std::string, std::string>> outputs;
    std::vector<std::string> notes;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["tool"] = kToolName;
        j["version"] = kToolVersion;
        j["command"] = command;
        j["spec"] = spec;
        j["samples"] = samples;
        j["seed"] = seed;
        j["tol"] = snap(tol);
        if (verdict) j["verdict"] = *verdict;
        if (!branch.empty()) j["branch"] = branch;
        nlohmann::ordered_json res = nlohmann::ordered_json::object();
        for (const auto& [name, stat] : residuals)
            res[name] = {{"max", snap(stat.max_norm)}, {"mean", snap(stat.mean_norm())}};
        j["residuals"] = res;
        if (!factors.empty()) {
            nlohmann::ordered_json f = nlohmann::ordered_json::array();
            for (double x : factors) f.push_back(snap(x));
            j["factors"] = f;
        }
        if (!outputs.empty()) {
            nlohmann::ordered_json o = nlohmann::ordered_json::object();
            for (const auto& [key, value] : outputs) o[key] = value;
            j["outputs"] = o;
        }
        j["notes"] = notes;
        return j;
    }

    std::string to_text() const {
        std::string out;
        out += std::string(kToolName) + " " + command + " " + spec + "\n";
        char line[160];
        std::snprintf(line, sizeof line, "samples %d, seed %llu, tol %g\n", samples,
                      static_cast<unsigned long long>(seed), tol);
        out += line;
        if (verdict) {
            out += std::string("verdict: ") + (*verdict ? "pass" : "fail");
            if (!branch.empty()) out += " (branch: " + branch + ")";
            out += "\n";
        }
        for (const auto& [name, stat] : residuals) {
            std::snprintf(line, sizeof line, "residual %-24s max %.3e  mean %.3e\n", name.c_str(),
                          stat.max_norm, stat.mean_norm());
            out += line;
        }
        if (!factors.empty()) {
            double lo = factors.front(), hi = factors.front();
            for (double x : factors) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            std::snprintf(line, sizeof line, "fitted factor range [%.6g, %.6g]\n", lo, hi);
            out += line;
        }
        for (const auto& [key, value] : outputs) out += key + " = " + value + "\n";
        for (const std::string& n : notes) out += "note: " + n + "\n";
        return out;
    }
};

}  // namespace carrollforge
