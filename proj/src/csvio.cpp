#include "specfuse/csvio.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "specfuse/errors.hpp"

namespace specfuse {

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_write(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "wb"), std::fclose);
    if (!f) throw ConfigError("csv: cannot open for writing: " + path);
    return f;
}

// Splits a CSV line into trimmed cells; returns empty for blank lines.
std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        std::size_t b = 0, e = cell.size();
        while (b < e && std::isspace(static_cast<unsigned char>(cell[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(cell[e - 1]))) --e;
        cells.push_back(cell.substr(b, e - b));
    }
    while (!cells.empty() && cells.back().empty()) cells.pop_back();
    bool all_empty = true;
    for (const auto& c : cells) all_empty = all_empty && c.empty();
    return all_empty ? std::vector<std::string>{} : cells;
}

bool parse_number(const std::string& s, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

// Numeric rows of the file; rows whose first cell is not a number (headers)
// are skipped.
std::vector<std::vector<double>> read_numeric_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("csv: cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        const auto cells = split_cells(line);
        if (cells.empty()) continue;
        double first = 0.0;
        if (!parse_number(cells[0], first)) continue;
        std::vector<double> row{first};
        for (std::size_t i = 1; i < cells.size(); ++i) {
            double v = 0.0;
            if (!parse_number(cells[i], v))
                throw ConfigError("csv: non-numeric cell '" + cells[i] + "' in " + path);
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
    auto f = open_write(path);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            std::fprintf(f.get(), "%s%.17g", c ? "," : "", m(r, c));
        std::fputc('\n', f.get());
    }
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    const auto rows = read_numeric_rows(path);
    if (rows.empty()) throw ConfigError("csv: no numeric rows in " + path);
    const std::size_t cols = rows[0].size();
    for (const auto& row : rows)
        if (row.size() != cols)
            throw ConfigError("csv: ragged rows in " + path);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

SrfTable read_srf_table(const std::string& path) {
    const auto rows = read_numeric_rows(path);
    if (rows.empty()) throw ConfigError("band table: no rows in " + path);
    SrfTable table;
    table.intervals.resize(rows.size());
    std::vector<bool> seen(rows.size(), false);
    bool any_weights = false;
    std::vector<Eigen::VectorXd> weights(rows.size());
    for (const auto& row : rows) {
        if (row.size() < 3)
            throw ConfigError("band table: rows need msi_band, lambda_low_nm, lambda_high_nm: " +
                              path);
        const double bidx = row[0];
        const int b = static_cast<int>(bidx);
        if (b != bidx || b < 0 || b >= static_cast<int>(rows.size()) || seen[b])
            throw ConfigError("band table: band indices must be 0..n-1, once each: " + path);
        seen[b] = true;
        if (!(row[1] < row[2]))
            throw ConfigError("band table: interval bounds must increase: " + path);
        table.intervals[static_cast<std::size_t>(b)] = {row[1], row[2]};
        if (row.size() > 3) {
            any_weights = true;
            Eigen::VectorXd w(static_cast<Eigen::Index>(row.size() - 3));
            for (std::size_t i = 3; i < row.size(); ++i)
                w[static_cast<Eigen::Index>(i - 3)] = row[i];
            weights[static_cast<std::size_t>(b)] = std::move(w);
        }
    }
    if (any_weights) {
        for (std::size_t b = 0; b < weights.size(); ++b)
            if (weights[b].size() == 0)
                throw ConfigError("band table: weights given for some bands but not all: " +
                                  path);
        table.weights = std::move(weights);
    }
    return table;
}

void write_coverage_csv(const std::string& path,
                        const std::vector<std::pair<double, double>>& intervals) {
    auto f = open_write(path);
    std::fprintf(f.get(), "msi_band,lambda_low_nm,lambda_high_nm\n");
    for (std::size_t i = 0; i < intervals.size(); ++i)
        std::fprintf(f.get(), "%zu,%.17g,%.17g\n", i, intervals[i].first,
                     intervals[i].second);
}

void write_srf_weights_csv(const std::string& path,
                           const std::vector<Eigen::VectorXd>& weights) {
    auto f = open_write(path);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        std::fprintf(f.get(), "%zu", i);
        for (Eigen::Index j = 0; j < weights[i].size(); ++j)
            std::fprintf(f.get(), ",%.17g", weights[i][j]);
        std::fputc('\n', f.get());
    }
}

}  // namespace specfuse
