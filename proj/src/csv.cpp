#include "iilab/csv.hpp"

#include <cstdio>

#include "iilab/common.hpp"

namespace iilab {

namespace {

std::string join_fields(const std::vector<std::string>& fields) {
    std::string line;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += fields[i];
    }
    line += '\n';
    return line;
}

}  // namespace

CsvWriter::CsvWriter(std::filesystem::path path, const std::vector<std::string>& header)
    : final_path_(std::move(path)),
      partial_path_(final_path_.string() + ".partial"),
      n_fields_(header.size()) {
    if (header.empty()) throw InvalidInput("csv header must have at least one column");
    if (final_path_.has_parent_path()) std::filesystem::create_directories(final_path_.parent_path());
    out_.open(partial_path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw RuntimeFailure("cannot open " + partial_path_.string() + " for writing");
    out_ << join_fields(header);
    out_.flush();
    if (!out_) throw RuntimeFailure("write failed for " + partial_path_.string());
}

CsvWriter::~CsvWriter() {
    // Without finish() the .partial file stays behind on purpose.
    if (out_.is_open()) out_.close();
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (finished_) throw InvalidInput("csv row after finish()");
    if (fields.size() != n_fields_)
        throw InvalidInput("csv row has " + std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(n_fields_));
    out_ << join_fields(fields);
    out_.flush();
    if (!out_) throw RuntimeFailure("write failed for " + partial_path_.string());
}

void CsvWriter::finish() {
    if (finished_) return;
    out_.close();
    if (out_.fail()) throw RuntimeFailure("close failed for " + partial_path_.string());
    std::error_code ec;
    std::filesystem::rename(partial_path_, final_path_, ec);
    if (ec)
        throw RuntimeFailure("cannot rename " + partial_path_.string() + " to " +
                             final_path_.string() + ": " + ec.message());
    finished_ = true;
}

std::string fmt_fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt_int(long long v) { return std::to_string(v); }

}  // namespace iilab
