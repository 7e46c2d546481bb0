#ifndef MISCORR_DATASET_HPP
#define MISCORR_DATASET_HPP

// Named numeric columns with CSV input/output. Missing cells (empty, NA,
// NaN) are stored as quiet NaN.

#include "core.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace miscorr
{

class Dataset
{
public:
    Dataset() = default;

    Dataset(std::vector<std::string> names, Eigen::MatrixXd values) : names_(std::move(names)), values_(std::move(values))
    {
        require_dims(static_cast<Eigen::Index>(names_.size()) == values_.cols(), "column names do not match data width");
        for (std::size_t i = 0; i < names_.size(); ++i)
            for (std::size_t j = i + 1; j < names_.size(); ++j)
                require(names_[i] != names_[j], "duplicate column name '" + names_[i] + "'");
    }

    Eigen::Index rows() const noexcept { return values_.rows(); }
    Eigen::Index cols() const noexcept { return values_.cols(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }

    bool has(const std::string& name) const
    {
        return std::find(names_.begin(), names_.end(), name) != names_.end();
    }

    Eigen::Index index_of(const std::string& name) const
    {
        const auto it = std::find(names_.begin(), names_.end(), name);
        if (it == names_.end()) throw Error("unknown column '" + name + "'");
        return static_cast<Eigen::Index>(it - names_.begin());
    }

    Eigen::VectorXd column(const std::string& name) const { return values_.col(index_of(name)); }

    Eigen::MatrixXd columns(const std::vector<std::string>& names) const
    {
        Eigen::MatrixXd m(rows(), static_cast<Eigen::Index>(names.size()));
        for (std::size_t c = 0; c < names.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = column(names[c]);
        return m;
    }

    void add_column(const std::string& name, const Eigen::VectorXd& v)
    {
        require(!has(name), "duplicate column name '" + name + "'");
        require_dims(names_.empty() || v.size() == rows(), "column '" + name + "' has the wrong length");
        names_.push_back(name);
        values_.conservativeResize(v.size(), values_.cols() + 1);
        values_.col(values_.cols() - 1) = v;
    }

    Dataset select_rows(const std::vector<Eigen::Index>& idx) const
    {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(idx.size()), cols());
        for (std::size_t s = 0; s < idx.size(); ++s) m.row(static_cast<Eigen::Index>(s)) = values_.row(idx[s]);
        return Dataset(names_, std::move(m));
    }

    /// Keeps rows whose listed columns are all non-missing; returns the drop count.
    std::pair<Dataset, Eigen::Index> drop_missing(const std::vector<std::string>& names) const
    {
        std::vector<Eigen::Index> cols_idx;
        for (const auto& n : names) cols_idx.push_back(index_of(n));
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < rows(); ++i) {
            bool ok = true;
            for (Eigen::Index c : cols_idx) ok = ok && !std::isnan(values_(i, c));
            if (ok) keep.push_back(i);
        }
        const Eigen::Index dropped = rows() - static_cast<Eigen::Index>(keep.size());
        return {select_rows(keep), dropped};
    }

private:
    std::vector<std::string> names_;
    Eigen::MatrixXd values_;
};

namespace detail
{

// Splits one CSV record; handles quoted fields with doubled quotes.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (quoted) throw Error("unterminated quote on line " + std::to_string(line_no));
    out.push_back(std::move(cur));
    return out;
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool is_missing_token(const std::string& s)
{
    return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "na" || s == ".";
}

inline double parse_cell(const std::string& raw, std::size_t line_no, const std::string& column)
{
    const std::string s = trim(raw);
    if (is_missing_token(s)) return std::numeric_limits<double>::quiet_NaN();
    if (s == "TRUE" || s == "true") return 1.0;
    if (s == "FALSE" || s == "false") return 0.0;
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw Error("cannot parse '" + s + "' as a number (line " + std::to_string(line_no) + ", column '" + column + "')");
    return v;
}

inline std::string quote_csv(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q.push_back('"');
        q.push_back(ch);
    }
    q.push_back('"');
    return q;
}

} // namespace detail

/// Shortest decimal text that round-trips the double exactly; NaN as NA.
inline std::string format_number(double v)
{
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw Error("number formatting failed");
    return std::string(buf, ptr);
}

inline Dataset read_csv(std::istream& in)
{
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty()) {
            for (auto& h : detail::split_csv_line(line, line_no)) header.push_back(detail::trim(h));
            break;
        }
    }
    require(!header.empty(), "CSV input has no header row");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line, line_no);
        if (cells.size() != header.size())
            throw Error("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                        " fields, header has " + std::to_string(header.size()));
        std::vector<double> r(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) r[c] = detail::parse_cell(cells[c], line_no, header[c]);
        rows.push_back(std::move(r));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < header.size(); ++c)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    return Dataset(std::move(header), std::move(m));
}

inline Dataset read_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    return read_csv(in);
}

inline void write_csv(std::ostream& out, const Dataset& d)
{
    for (Eigen::Index c = 0; c < d.cols(); ++c)
        out << (c ? "," : "") << detail::quote_csv(d.names()[static_cast<std::size_t>(c)]);
    out << '\n';
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        for (Eigen::Index c = 0; c < d.cols(); ++c) out << (c ? "," : "") << format_number(d.values()(i, c));
        out << '\n';
    }
}

inline void write_csv_file(const std::string& path, const Dataset& d)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_csv(out, d);
}

/// How a binary column is coded in the file.
enum class Coding { one_two, zero_one };

inline Categories to_categories(const Eigen::VectorXd& v, Coding coding)
{
    return coding == Coding::one_two ? categories_from_12(v) : categories_from_01(v);
}

inline Eigen::VectorXd categories_to_vector(const Categories& c)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) v[static_cast<Eigen::Index>(i)] = c[i];
    return v;
}

} // namespace miscorr

#endif
