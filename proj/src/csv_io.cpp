#include "tfint/csv_io.hpp"

#include "tfint/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tfint {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("missing_file", "cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("write_failed", "cannot write '" + tmp.string() + "'");
        }
        out << contents;
        if (!out) {
            throw DataError("write_failed", "short write to '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path);
}

Table parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            quoted = true;
            any = true;
            break;
        case ',':
            record.push_back(std::move(field));
            field.clear();
            any = true;
            break;
        case '\r':
            break;
        case '\n':
            if (any || !field.empty()) {
                record.push_back(std::move(field));
                records.push_back(std::move(record));
            }
            record.clear();
            field.clear();
            any = false;
            break;
        default:
            field += c;
            any = true;
        }
    }
    if (quoted) {
        throw DataError("bad_csv", "unterminated quoted field");
    }
    if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    Table t;
    if (records.empty()) {
        throw DataError("bad_csv", "empty CSV");
    }
    t.header = std::move(records.front());
    t.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
    return t;
}

Table read_csv(const fs::path& path) {
    try {
        return parse_csv(read_file(path));
    } catch (const DataError& e) {
        throw DataError(e.code(), path.string() + ": " + e.what());
    }
}

namespace {
std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

void append_row(std::string& out, const std::vector<std::string>& row) {
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (k) out += ',';
        out += quote(row[k]);
    }
    out += '\n';
}
}  // namespace

std::string to_csv(const Table& table) {
    std::string out;
    append_row(out, table.header);
    for (const auto& row : table.rows) {
        append_row(out, row);
    }
    return out;
}

void write_csv(const fs::path& path, const Table& table) {
    write_file_atomic(path, to_csv(table));
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

InterventionSeriesSet read_dataset(const fs::path& dir) {
    auto set = ingest(read_csv(dir / "reads.csv"), read_csv(dir / "interventions.csv"),
                      read_csv(dir / "samples.csv"), read_csv(dir / "subjects.csv"));
    const auto meta = dir / "dataset.json";
    if (fs::exists(meta)) {
        auto j = nlohmann::json::parse(read_file(meta));
        set.scale_tag = scale_tag_from_string(j.value("scale", "counts"));
        set.validate();
    }
    return set;
}

void write_dataset(const InterventionSeriesSet& set, const fs::path& dir) {
    fs::create_directories(dir);
    Table reads, samples, interventions, subjects;
    reads.header = {"taxon"};
    samples.header = {"sample", "subject", "time"};
    interventions.header = {"sample"};
    interventions.header.insert(interventions.header.end(), set.intervention_names.begin(),
                                set.intervention_names.end());
    subjects.header = {"subject"};
    subjects.header.insert(subjects.header.end(), set.covariate_names.begin(), set.covariate_names.end());

    for (const auto& name : set.taxa_names) {
        reads.rows.push_back({name});
    }
    for (const auto& s : set.subjects) {
        if (s.n_observed() != s.n_times()) {
            throw ValidationError("partial_abundances", "cannot export subject '" + s.subject_id +
                                                            "' with unobserved abundances");
        }
        std::vector<std::string> zrow{s.subject_id};
        for (Eigen::Index k = 0; k < s.covariates.size(); ++k) {
            zrow.push_back(format_double(s.covariates(k)));
        }
        subjects.rows.push_back(std::move(zrow));
        for (std::size_t t = 0; t < s.n_times(); ++t) {
            const auto c = static_cast<Eigen::Index>(t);
            const std::string sample = s.subject_id + "_" + std::to_string(t);
            reads.header.push_back(sample);
            for (std::size_t j = 0; j < set.n_taxa(); ++j) {
                reads.rows[j].push_back(format_double(s.abundances(static_cast<Eigen::Index>(j), c)));
            }
            samples.rows.push_back({sample, s.subject_id, format_double(s.times[t])});
            std::vector<std::string> wrow{sample};
            for (Eigen::Index d = 0; d < s.interventions.rows(); ++d) {
                wrow.push_back(format_double(s.interventions(d, c)));
            }
            interventions.rows.push_back(std::move(wrow));
        }
    }
    write_csv(dir / "reads.csv", reads);
    write_csv(dir / "samples.csv", samples);
    write_csv(dir / "interventions.csv", interventions);
    write_csv(dir / "subjects.csv", subjects);
    nlohmann::json meta{{"scale", std::string(to_string(set.scale_tag))}};
    write_file_atomic(dir / "dataset.json", meta.dump(2) + "\n");
}

}  // namespace tfint
