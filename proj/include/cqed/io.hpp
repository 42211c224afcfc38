#pragma once

#include <string>
#include <vector>

namespace cqed {

inline constexpr const char* kCodeVersion = "0.1.0";

/// Locale-independent shortest round-trip representation ('.' decimal).
std::string format_double(double v);
std::string format_int(long long v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Writes the table with ',' separators and '\n' line endings; a rerun with
/// identical content is byte-identical.
void write_csv(const std::string& path, const CsvTable& table);

/// Raw text writer with '\n' endings (residual reports).
void write_text(const std::string& path, const std::string& content);

/// Sidecar named like the CSV with the extension replaced by .meta.json;
/// records the resolved config (serialized JSON), code version and wall time.
void write_metadata(const std::string& csv_path, const std::string& subcommand,
                    const std::string& resolved_config_json, double wall_time_s);

struct SvgSeries {
    std::string label;
    std::vector<double> x, y;
};

/// Minimal static line chart; points with nonpositive coordinates are dropped
/// on logarithmic axes. Convenience output only.
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<SvgSeries>& series, bool logx = false,
                     bool logy = false);

}  // namespace cqed
