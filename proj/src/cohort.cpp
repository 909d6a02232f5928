#include "edpredict/cohort.hpp"

#include "edpredict/csv.hpp"
#include "edpredict/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace edpredict {

namespace {

std::size_t column_index(std::string_view column) {
    const auto &columns = cohort_columns();
    const auto it = std::find(columns.begin(), columns.end(), column);
    if (it == columns.end()) {
        throw Error(ErrorCode::MissingColumn, "no cohort column '" + std::string(column) + "'",
                    std::string(column));
    }
    return static_cast<std::size_t>(it - columns.begin());
}

std::string trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t");
    return std::string(text.substr(first, last - first + 1));
}

std::string upper(std::string text) {
    std::transform(text.begin(), text.end(), text.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return text;
}

std::optional<double> parse_number(const std::string &text) {
    double value = 0.0;
    const auto *begin = text.data();
    const auto *end = text.data() + text.size();
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end) {
        return std::nullopt;
    }
    return value;
}

// Parses one cell of a numeric field; empty cells become the missing code.
std::optional<double> parse_field(const FieldInfo &field, const std::string &raw) {
    const std::string text = trim(raw);
    if (text.empty()) {
        if (field.missing_code) {
            return static_cast<double>(*field.missing_code);
        }
        return std::nullopt;
    }
    const auto value = parse_number(text);
    if (!value || !field.in_domain(*value)) {
        throw Error(ErrorCode::OutOfRangeCode,
                    std::string(field.name) + " has invalid value '" + text + "'",
                    std::string(field.name));
    }
    return value;
}

std::optional<int> parse_outcome_cell(const std::string &raw, std::string_view column) {
    const std::string text = trim(raw);
    if (text.empty()) {
        return std::nullopt;
    }
    const auto value = parse_number(text);
    if (!value || *value != std::floor(*value) || *value < 1 || *value > 5) {
        throw Error(ErrorCode::OutOfRangeAnswer,
                    std::string(column) + " has invalid answer '" + text + "'",
                    std::string(column));
    }
    return static_cast<int>(*value);
}

bool has_value(const FieldInfo &field, const PatientRecord &record) {
    return field.get(record).has_value();
}

} // namespace

const std::string &RawRow::cell(std::string_view column) const {
    return cells.at(column_index(column));
}

RawCohort ingest(const std::filesystem::path &path) {
    const csv::Table table = csv::read(path);
    const auto &columns = cohort_columns();

    std::vector<std::size_t> source_index(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto it = std::find(table.header.begin(), table.header.end(), columns[c]);
        if (it == table.header.end()) {
            throw Error(ErrorCode::MissingColumn,
                        path.string() + " lacks column '" + columns[c] + "'", columns[c]);
        }
        source_index[c] = static_cast<std::size_t>(it - table.header.begin());
    }
    for (const auto &name : table.header) {
        if (std::find(columns.begin(), columns.end(), name) == columns.end()) {
            throw Error(ErrorCode::InvalidArgument,
                        path.string() + " has unexpected column '" + name + "'", name);
        }
    }
    if (table.rows.empty()) {
        throw Error(ErrorCode::EmptyFile, path.string() + " has a header but no rows");
    }

    RawCohort raw;
    raw.source = path;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto &cells = table.rows[r];
        if (cells.size() != table.header.size()) {
            std::string text;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                text += (i ? "," : "") + cells[i];
            }
            raw.malformed.push_back({table.line_numbers[r], text,
                                     "expected " + std::to_string(table.header.size()) +
                                         " cells, found " + std::to_string(cells.size())});
            continue;
        }
        RawRow row;
        row.line = table.line_numbers[r];
        row.cells.reserve(columns.size());
        for (std::size_t c = 0; c < columns.size(); ++c) {
            row.cells.push_back(cells[source_index[c]]);
        }
        raw.rows.push_back(std::move(row));
    }
    return raw;
}

TreatmentCategory map_treatment(std::string_view text) {
    TreatmentCategory out;
    const std::string cleaned = upper(trim(text));
    if (cleaned.empty()) {
        out.exclusion_reason = "no treatment recorded";
        return out;
    }
    if (const auto code = parse_number(cleaned)) {
        if (*code == std::floor(*code) && *code >= 1 && *code <= 4) {
            out.group = static_cast<int>(*code);
        } else {
            out.exclusion_reason = "unknown treatment code '" + cleaned + "'";
        }
        return out;
    }

    std::set<std::string> tokens;
    std::stringstream stream(cleaned);
    std::string token;
    while (std::getline(stream, token, '+')) {
        token = trim(token);
        if (!token.empty()) {
            tokens.insert(token);
        }
    }
    static const std::set<std::string> known{"RP", "LND", "HT", "EBRT", "BT", "AS", "WW", "NAT"};
    for (const auto &t : tokens) {
        if (!known.contains(t)) {
            out.exclusion_reason = "unrecognized treatment '" + t + "'";
            return out;
        }
    }
    const bool rp = tokens.contains("RP");
    const bool ebrt = tokens.contains("EBRT");
    const bool bt = tokens.contains("BT");
    const bool lnd = tokens.contains("LND");
    const bool no_active =
        tokens.contains("AS") || tokens.contains("WW") || tokens.contains("NAT");
    out.hormone_therapy = tokens.contains("HT");

    const int primaries = int(rp) + int(ebrt) + int(bt) + int(no_active);
    if (primaries == 0) {
        out.exclusion_reason = "none of the treatment options";
        out.hormone_therapy = false;
        return out;
    }
    if (primaries > 1) {
        out.exclusion_reason = "combination of treatments";
        out.hormone_therapy = false;
        return out;
    }
    if (rp) {
        out.group = 1;
    } else if (ebrt) {
        out.group = 2;
    } else if (bt) {
        if (lnd) {
            out.exclusion_reason = "combination of treatments";
            out.hormone_therapy = false;
            return out;
        }
        out.group = 3;
    } else {
        if (lnd || out.hormone_therapy) {
            out.exclusion_reason = "combination of treatments";
            out.hormone_therapy = false;
            return out;
        }
        out.group = 4;
    }
    return out;
}

TreatmentMapping map_treatments(const RawCohort &raw) {
    TreatmentMapping mapping;
    mapping.treatment.reserve(raw.rows.size());
    mapping.hormone_therapy.reserve(raw.rows.size());
    const FieldInfo &hormone_field = *find_field("hormone_therapy");
    for (const auto &row : raw.rows) {
        const std::string &text = row.cell("treatment_group");
        const TreatmentCategory category = map_treatment(text);
        if (!category.group) {
            mapping.treatment.emplace_back();
            mapping.hormone_therapy.emplace_back();
            mapping.exclusions.push_back({row.cell("patient_id"), category.exclusion_reason});
            continue;
        }
        mapping.treatment.emplace_back(*category.group);

        std::optional<int> hormone;
        const std::string hormone_cell = trim(row.cell("hormone_therapy"));
        if (!hormone_cell.empty()) {
            const auto v = parse_number(hormone_cell);
            if (v && hormone_field.in_domain(*v)) {
                hormone = static_cast<int>(*v);
            }
        }
        const bool descriptive = !parse_number(trim(text)).has_value();
        if (category.hormone_therapy) {
            hormone = 1;
        } else if (!hormone && descriptive) {
            hormone = 0;
        }
        mapping.hormone_therapy.push_back(hormone);
    }
    return mapping;
}

Cohort build_cohort(const RawCohort &raw, const TreatmentMapping &mapping) {
    Cohort cohort;
    for (const auto &bad : raw.malformed) {
        const auto comma = bad.text.find(',');
        std::string id = bad.text.substr(0, comma);
        if (id.empty()) {
            id = "line " + std::to_string(bad.line);
        }
        cohort.exclusions.push_back({id, "malformed row: " + bad.reason});
    }
    cohort.exclusions.insert(cohort.exclusions.end(), mapping.exclusions.begin(),
                             mapping.exclusions.end());

    std::set<std::string> seen;
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        const auto &row = raw.rows[r];
        if (!mapping.treatment[r]) {
            continue;
        }
        PatientRecord record;
        record.patient_id = trim(row.cell("patient_id"));
        record.hospital_id = trim(row.cell("hospital_id"));
        if (record.patient_id.empty()) {
            cohort.exclusions.push_back({"line " + std::to_string(row.line), "missing patient_id"});
            continue;
        }
        if (record.hospital_id.empty()) {
            cohort.exclusions.push_back({record.patient_id, "missing hospital_id"});
            continue;
        }
        if (!seen.insert(record.patient_id).second) {
            cohort.exclusions.push_back({record.patient_id, "duplicate patient_id"});
            continue;
        }
        try {
            for (const auto &field : model_fields()) {
                if (field.name == "treatment_group") {
                    record.treatment_group = mapping.treatment[r];
                } else if (field.name == "hormone_therapy") {
                    record.hormone_therapy = mapping.hormone_therapy[r];
                } else {
                    field.set(record, parse_field(field, row.cell(field.name)));
                }
            }
            record.tumor_n_stage = trim(row.cell("tumor_n_stage"));
            record.outcome_1y = parse_outcome_cell(row.cell("outcome_1y"), "outcome_1y");
            record.outcome_2y = parse_outcome_cell(row.cell("outcome_2y"), "outcome_2y");
        } catch (const Error &e) {
            cohort.exclusions.push_back({record.patient_id, "invalid value in " + e.field()});
            continue;
        }
        cohort.records.push_back(std::move(record));
    }
    for (const auto &field : model_fields()) {
        cohort.variables.emplace_back(field.name);
    }
    return cohort;
}

Cohort load_cohort(const std::filesystem::path &path) {
    const RawCohort raw = ingest(path);
    return build_cohort(raw, map_treatments(raw));
}

double nearest_rank_percentile(std::vector<double> values, double pct) {
    if (values.empty()) {
        throw Error(ErrorCode::InvalidArgument, "percentile of an empty sample");
    }
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(pct / 100.0 * static_cast<double>(values.size()) - 1e-12));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

Cohort apply_missingness_policy(const Cohort &cohort, double variable_threshold,
                                HorizonMonths horizon) {
    if (!(variable_threshold > 0.0 && variable_threshold <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "variable missingness threshold must be in (0, 1]",
                    "var_threshold");
    }
    Cohort out;
    out.horizon = horizon;
    out.exclusions = cohort.exclusions;
    out.dropped_variables = cohort.dropped_variables;
    const std::string no_outcome =
        "no outcome at " + std::to_string(static_cast<int>(horizon)) + " months";
    for (const auto &record : cohort.records) {
        if (record.outcome(horizon)) {
            out.records.push_back(record);
        } else {
            out.exclusions.push_back({record.patient_id, no_outcome});
        }
    }

    std::vector<const FieldInfo *> active;
    for (const auto &name : cohort.variables) {
        active.push_back(find_field(name));
    }

    bool changed = true;
    while (changed && !out.records.empty()) {
        changed = false;

        // variable level
        const double n = static_cast<double>(out.records.size());
        for (auto it = active.begin(); it != active.end();) {
            const auto missing = std::count_if(
                out.records.begin(), out.records.end(),
                [&](const PatientRecord &r) { return (*it)->is_missing(r); });
            if (static_cast<double>(missing) / n > variable_threshold) {
                out.dropped_variables.emplace_back((*it)->name);
                it = active.erase(it);
                changed = true;
            } else {
                ++it;
            }
        }

        // patient level
        std::vector<double> counts;
        counts.reserve(out.records.size());
        for (const auto &record : out.records) {
            counts.push_back(static_cast<double>(std::count_if(
                active.begin(), active.end(),
                [&](const FieldInfo *f) { return f->is_missing(record); })));
        }
        const double cutoff = nearest_rank_percentile(counts, 95.0);
        std::vector<PatientRecord> kept;
        kept.reserve(out.records.size());
        for (std::size_t i = 0; i < out.records.size(); ++i) {
            if (counts[i] > cutoff) {
                out.exclusions.push_back(
                    {out.records[i].patient_id, "missing values above 95th percentile"});
                changed = true;
            } else {
                kept.push_back(std::move(out.records[i]));
            }
        }
        out.records = std::move(kept);

        // values without a missing code cannot enter a linear predictor
        kept.clear();
        for (auto &record : out.records) {
            const auto absent = std::find_if(active.begin(), active.end(), [&](const FieldInfo *f) {
                return !has_value(*f, record);
            });
            if (absent != active.end()) {
                out.exclusions.push_back(
                    {record.patient_id, "missing " + std::string((*absent)->name)});
                changed = true;
            } else {
                kept.push_back(std::move(record));
            }
        }
        out.records = std::move(kept);
    }

    if (out.records.empty()) {
        throw Error(ErrorCode::AllPatientsExcluded,
                    "missingness policy excluded every patient");
    }
    for (const auto *field : active) {
        out.variables.emplace_back(field->name);
    }
    return out;
}

BinaryOutcome binarize_outcome(const PatientRecord &record, HorizonMonths horizon) {
    const auto answer = record.outcome(horizon);
    if (!answer) {
        return BinaryOutcome::Missing;
    }
    if (*answer < 1 || *answer > 5) {
        throw Error(ErrorCode::OutOfRangeAnswer,
                    "EPIC-26 Q10 answer " + std::to_string(*answer) + " outside 1..5",
                    horizon == HorizonMonths::OneYear ? "outcome_1y" : "outcome_2y");
    }
    return *answer == 1 ? BinaryOutcome::ED : BinaryOutcome::Function;
}

void write_exclusions_csv(const std::vector<Exclusion> &exclusions,
                          const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
    }
    csv::write_row(out, {"patient_id", "reason"});
    for (const auto &e : exclusions) {
        csv::write_row(out, {e.patient_id, e.reason});
    }
}

void write_cohort_csv(const std::vector<PatientRecord> &records,
                      const std::vector<std::string> &treatment_text, std::ostream &out) {
    const auto &columns = cohort_columns();
    csv::write_row(out, columns);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto &record = records[i];
        std::vector<std::string> cells;
        cells.reserve(columns.size());
        for (const auto &column : columns) {
            if (column == "patient_id") {
                cells.push_back(record.patient_id);
            } else if (column == "hospital_id") {
                cells.push_back(record.hospital_id);
            } else if (column == "tumor_n_stage") {
                cells.push_back(record.tumor_n_stage);
            } else if (column == "outcome_1y" || column == "outcome_2y") {
                const auto v = column == "outcome_1y" ? record.outcome_1y : record.outcome_2y;
                cells.push_back(v ? std::to_string(*v) : std::string{});
            } else if (column == "treatment_group" && i < treatment_text.size()) {
                cells.push_back(treatment_text[i]);
            } else {
                const FieldInfo &field = *find_field(column);
                const auto v = field.get(record);
                if (!v) {
                    cells.emplace_back();
                } else if (field.kind == FieldKind::Real) {
                    cells.push_back(csv::number(*v));
                } else {
                    cells.push_back(std::to_string(static_cast<int>(*v)));
                }
            }
        }
        csv::write_row(out, cells);
    }
}

void write_cohort_csv(const std::vector<PatientRecord> &records,
                      const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
    }
    write_cohort_csv(records, {}, out);
}

} // namespace edpredict
