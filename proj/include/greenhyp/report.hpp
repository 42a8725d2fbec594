#pragma once

// CSV reports and atomic artifact writes.

#include "core.hpp"
#include "green.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace greenhyp {

struct Report {
    std::string command;
    std::string inputs_digest;
    std::vector<CheckRow> rows;
    double wall_seconds = 0; // logged, never written to the CSV

    [[nodiscard]] bool pass() const { return all_pass(rows); }

    void add(const std::vector<CheckRow>& more) { rows.insert(rows.end(), more.begin(), more.end()); }

    // Rows sorted by name so that assembly order never changes the bytes.
    [[nodiscard]] std::string csv() const
    {
        std::vector<CheckRow> sorted = rows;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const CheckRow& a, const CheckRow& b) { return a.name < b.name; });
        std::ostringstream out;
        out << "# command: " << command << '\n';
        out << "# inputs: " << inputs_digest << '\n';
        out << "name,value,cmp,threshold,pass\n";
        for (const auto& r : sorted)
            out << r.name << ',' << format_double(r.value) << ',' << r.cmp() << ',' << format_double(r.threshold)
                << ',' << (r.pass ? "true" : "false") << '\n';
        return out.str();
    }

    [[nodiscard]] std::vector<const CheckRow*> failures() const
    {
        std::vector<const CheckRow*> f;
        for (const auto& r : rows)
            if (!r.pass) f.push_back(&r);
        return f;
    }
};

// Pass flag recomputed from a CSV row "name,value,cmp,threshold,pass".
inline bool recompute_pass(const std::string& csv_row)
{
    std::vector<std::string> f;
    std::stringstream ss(csv_row);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    require(f.size() == 5, "report row needs five fields", ErrorKind::parse);
    const double v = std::stod(f[1]), t = std::stod(f[3]);
    return f[2] == ">=" ? v >= t : v <= t;
}

} // namespace greenhyp
