#include "synth/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace synth {

namespace {

std::string fixed3(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(3) << v;
    return ss.str();
}

void row(std::ostringstream& out, const std::vector<std::string>& cells,
         const std::vector<size_t>& widths) {
    for (size_t i = 0; i < cells.size(); ++i) {
        out << std::left << std::setw(static_cast<int>(widths[i]) + 2) << cells[i];
    }
    out << "\n";
}

}  // namespace

std::string fidelity_text(const FidelityReport& rep, const std::string& row_label) {
    std::ostringstream out;
    std::vector<size_t> widths = {std::max<size_t>(row_label.size(), 10), 8, 8};
    row(out, {"", "EMD", "Distance"}, widths);
    row(out, {row_label, fixed3(rep.aggregate_emd), fixed3(rep.aggregate_distance)}, widths);
    out << "\nper-column EMD (continuous, standardized):\n";
    for (const auto& [name, v] : rep.emd_per_column)
        out << "  " << name << ": " << fixed3(v) << "\n";
    out << "per-column L1 frequency distance (categorical):\n";
    for (const auto& [name, v] : rep.l1_freq_per_column)
        out << "  " << name << ": " << fixed3(v) << "\n";
    return out.str();
}

std::string tstr_text(const std::vector<TstrEntry>& entries) {
    std::ostringstream out;
    std::vector<size_t> widths = {22, 10, 10, 10, 10, 10};
    row(out, {"classifier", "baseline", "tstr", "gap", "tstr-f1", "base-f1"}, widths);
    for (const auto& e : entries) {
        row(out,
            {e.kind, fixed3(e.baseline.accuracy), fixed3(e.tstr.accuracy),
             fixed3(e.accuracy_gap), fixed3(e.tstr.f1), fixed3(e.baseline.f1)},
            widths);
    }
    return out.str();
}

std::string attacks_text(const std::vector<AttackReport>& reports) {
    auto compact = [](double v) {
        if (v == std::floor(v) && std::abs(v) < 1e15) {
            std::ostringstream ss;
            ss << static_cast<long long>(v);
            return ss.str();
        }
        return fixed3(v);
    };
    std::vector<std::vector<std::string>> cells = {{"attack", "setting", "success", "chance"}};
    for (const auto& r : reports) {
        std::string setting = r.setting_label;
        for (const auto& [k, v] : r.setting) {
            if (!setting.empty()) setting += " ";
            setting += k + "=" + compact(v);
        }
        cells.push_back({r.attack, setting, fixed3(r.success), fixed3(r.baseline)});
    }
    std::vector<size_t> widths(4, 0);
    for (const auto& line : cells)
        for (size_t i = 0; i < 4; ++i) widths[i] = std::max(widths[i], line[i].size());
    std::ostringstream out;
    for (const auto& line : cells) row(out, line, widths);
    return out.str();
}

}  // namespace synth
