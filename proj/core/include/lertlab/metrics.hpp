#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lertlab {

// One record per optimizer step. Serialized as a JSON line with
// shortest-round-trip float formatting, so identical runs produce
// byte-identical streams and parsing recovers the exact doubles.
struct MetricsRecord {
    int64_t step = 0;
    double lr = 0.0;
    double lambda_pos = 0.0;
    double lambda_ner = 0.0;
    double lambda_dep = 0.0;
    double loss_mlm = 0.0;
    double loss_pos = 0.0;
    double loss_ner = 0.0;
    double loss_dep = 0.0;
    double loss_total = 0.0;
    int64_t masked_count = 0;
    int64_t wallclock_ms = 0;  // 0 in deterministic mode
};

std::string metrics_to_json(const MetricsRecord& record);
MetricsRecord metrics_from_json(const std::string& line);

std::vector<MetricsRecord> read_metrics_file(const std::string& path);

// Formats a double so that parsing the text recovers the identical bits.
std::string format_double(double v);

}  // namespace lertlab
