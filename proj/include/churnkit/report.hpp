#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "churnkit/csv.hpp"
#include "churnkit/error.hpp"

namespace churnkit {

/// One report table. Cells are JSON values: numbers, strings, or null
/// (null renders as an empty CSV cell / "-" in markdown).
struct ReportTable {
    std::string id;         // e.g. "table04_test_initial"
    std::string tag;        // e.g. "Table 4"
    std::string caption;
    std::string corner;  // header of the row-label column
    std::vector<std::string> row_labels, col_labels;
    std::vector<std::vector<nlohmann::json>> cells;  // rows x cols

    nlohmann::json to_json() const {
        return {{"id", id},           {"tag", tag}, {"caption", caption},
                {"corner", corner},   {"row_labels", row_labels}, {"col_labels", col_labels},
                {"cells", cells}};
    }

    static ReportTable from_json(const nlohmann::json& j) {
        ReportTable t;
        t.id = j.at("id");
        t.tag = j.at("tag");
        t.caption = j.at("caption");
        t.corner = j.value("corner", "");
        t.row_labels = j.at("row_labels").get<std::vector<std::string>>();
        t.col_labels = j.at("col_labels").get<std::vector<std::string>>();
        t.cells = j.at("cells").get<std::vector<std::vector<nlohmann::json>>>();
        return t;
    }
};

namespace report_detail {

inline std::string cell_text(const nlohmann::json& cell, int decimals) {
    if (cell.is_null()) return "";
    if (cell.is_string()) return cell.get<std::string>();
    if (cell.is_number_integer()) return std::to_string(cell.get<long long>());
    return csv::format_fixed(cell.get<double>(), decimals);
}

}  // namespace report_detail

/// Table numbers render at three decimals.
inline void write_table_csv(const ReportTable& t, const std::string& path, int decimals = 3) {
    std::vector<std::string> header{t.corner.empty() ? "metric" : t.corner};
    header.insert(header.end(), t.col_labels.begin(), t.col_labels.end());
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
        std::vector<std::string> row{t.row_labels[r]};
        for (const auto& cell : t.cells[r])
            row.push_back(report_detail::cell_text(cell, decimals));
        rows.push_back(std::move(row));
    }
    csv::write_file(path, header, rows);
}

inline void write_table_json(const ReportTable& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write " + path);
    out << t.to_json().dump(2) << '\n';
}

inline void append_table_markdown(const ReportTable& t, std::ostream& out, int decimals = 3) {
    out << "## " << t.tag << ". " << t.caption << "\n\n";
    out << "| " << (t.corner.empty() ? " " : t.corner) << " |";
    for (const auto& c : t.col_labels) out << ' ' << c << " |";
    out << "\n|---|";
    for (std::size_t c = 0; c < t.col_labels.size(); ++c) out << "---|";
    out << '\n';
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
        out << "| " << t.row_labels[r] << " |";
        for (const auto& cell : t.cells[r]) {
            const std::string txt = report_detail::cell_text(cell, decimals);
            out << ' ' << (txt.empty() ? "-" : txt) << " |";
        }
        out << '\n';
    }
    out << '\n';
}

/// Writes every table found in the manifest under out_dir/tables (csv or
/// json) or as one out_dir/report.md (markdown). Returns the file list.
inline std::vector<std::string> emit_report(const nlohmann::json& manifest,
                                            const std::string& format,
                                            const std::string& out_dir) {
    require(format == "csv" || format == "json" || format == "markdown",
            "emit_report: format must be csv, json or markdown");
    require(manifest.contains("stages"), "emit_report: manifest has no stages");

    std::vector<ReportTable> tables;
    for (const auto& [stage_name, stage] : manifest.at("stages").items()) {
        if (!stage.contains("tables")) continue;
        for (const auto& [id, tj] : stage.at("tables").items()) tables.push_back(ReportTable::from_json(tj));
    }
    std::sort(tables.begin(), tables.end(),
              [](const ReportTable& a, const ReportTable& b) { return a.id < b.id; });

    namespace fs = std::filesystem;
    std::vector<std::string> written;
    std::error_code ec;
    if (format == "markdown") {
        fs::create_directories(out_dir, ec);
        const std::string path = (fs::path(out_dir) / "report.md").string();
        std::ofstream out(path, std::ios::binary);
        if (!out) fail("cannot write " + path);
        out << "# Run report\n\n";
        for (const auto& t : tables) append_table_markdown(t, out);
        written.push_back(path);
        return written;
    }
    const fs::path dir = fs::path(out_dir) / "tables";
    fs::create_directories(dir, ec);
    for (const auto& t : tables) {
        const std::string path =
            (dir / (t.id + (format == "csv" ? ".csv" : ".json"))).string();
        if (format == "csv") write_table_csv(t, path);
        else write_table_json(t, path);
        written.push_back(path);
    }
    return written;
}

}  // namespace churnkit
