#include "lertlab/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lertlab/error.hpp"

#include "json.hpp"

namespace lertlab {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string metrics_to_json(const MetricsRecord& r) {
    std::ostringstream out;
    out << "{\"step\":" << r.step
        << ",\"lr\":" << format_double(r.lr)
        << ",\"lambda_P\":" << format_double(r.lambda_pos)
        << ",\"lambda_N\":" << format_double(r.lambda_ner)
        << ",\"lambda_D\":" << format_double(r.lambda_dep)
        << ",\"loss_mlm\":" << format_double(r.loss_mlm)
        << ",\"loss_pos\":" << format_double(r.loss_pos)
        << ",\"loss_ner\":" << format_double(r.loss_ner)
        << ",\"loss_dep\":" << format_double(r.loss_dep)
        << ",\"loss_total\":" << format_double(r.loss_total)
        << ",\"masked_count\":" << r.masked_count
        << ",\"wallclock_ms\":" << r.wallclock_ms << '}';
    return out.str();
}

MetricsRecord metrics_from_json(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::Parse, std::string("bad metrics line: ") + e.what());
    }
    MetricsRecord r;
    r.step = j.at("step").get<int64_t>();
    r.lr = j.at("lr").get<double>();
    r.lambda_pos = j.at("lambda_P").get<double>();
    r.lambda_ner = j.at("lambda_N").get<double>();
    r.lambda_dep = j.at("lambda_D").get<double>();
    r.loss_mlm = j.at("loss_mlm").get<double>();
    r.loss_pos = j.at("loss_pos").get<double>();
    r.loss_ner = j.at("loss_ner").get<double>();
    r.loss_dep = j.at("loss_dep").get<double>();
    r.loss_total = j.at("loss_total").get<double>();
    r.masked_count = j.at("masked_count").get<int64_t>();
    r.wallclock_ms = j.at("wallclock_ms").get<int64_t>();
    return r;
}

std::vector<MetricsRecord> read_metrics_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot open metrics file '" + path + "'");
    std::vector<MetricsRecord> records;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) records.push_back(metrics_from_json(line));
    return records;
}

}  // namespace lertlab
