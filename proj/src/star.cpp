#include "cryosim/star.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cryosim/error.hpp"

namespace cryosim {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t b = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > b) toks.push_back(line.substr(b, i - b));
    }
    return toks;
}

double parse_number(std::string_view tok, int line_no) {
    double v;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || !std::isfinite(v))
        fail_data("row " + std::to_string(line_no) + ": bad numeric value '" + std::string(tok) + "'");
    return v;
}

} // namespace

std::vector<PickRecord> parse_pick_table(std::string_view text) {
    // Pass 1: locate the loop_ label list.
    std::vector<std::string> labels;
    bool seen_data = false, seen_loop = false, in_labels = false;
    std::size_t row_start = 0; // byte offset where data rows begin
    int line_no = 0, row_line0 = 0;

    std::size_t pos = 0;
    while (pos <= text.size() && !(seen_loop && !in_labels)) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        std::size_t next = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        auto toks = split_ws(line);
        if (toks.empty() || toks[0].front() == '#') { pos = next; continue; }
        if (!seen_data) {
            if (toks[0].substr(0, 5) == "data_") seen_data = true;
            pos = next;
            continue;
        }
        if (!seen_loop) {
            if (toks[0] == "loop_") { seen_loop = true; in_labels = true; }
            pos = next;
            continue;
        }
        if (toks[0].front() == '_') {
            labels.emplace_back(toks[0]); // "#N" ordinals after the label are ignored
            pos = next;
            continue;
        }
        // first data row
        in_labels = false;
        row_start = pos;
        row_line0 = line_no;
        break;
    }

    if (!seen_data || !seen_loop) fail_data("no data_ block with a loop_ found");

    auto col = [&](std::string_view name) -> int {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == name) return static_cast<int>(i);
        return -1;
    };
    int cx = col("_rlnCoordinateX");
    int cy = col("_rlnCoordinateY");
    if (cx < 0) fail_data("missing required column _rlnCoordinateX");
    if (cy < 0) fail_data("missing required column _rlnCoordinateY");
    int crot = col("_rlnAngleRot");
    int ctilt = col("_rlnAngleTilt");
    int cpsi = col("_rlnAnglePsi");
    bool has_euler = crot >= 0 && ctilt >= 0 && cpsi >= 0;
    int cfom = col("_rlnAutopickFigureOfMerit");

    // Pass 2: data rows until blank line, comment-only tail, or a new block.
    std::vector<PickRecord> records;
    pos = row_start;
    line_no = row_line0 - 1;
    while (pos <= text.size() && row_start != 0) {
        std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        auto toks = split_ws(line);
        if (toks.empty()) break;
        if (toks[0].front() == '#') continue;
        if (toks[0].substr(0, 5) == "data_" || toks[0] == "loop_") break;
        if (toks.size() != labels.size())
            fail_data("row " + std::to_string(line_no) + ": expected " +
                      std::to_string(labels.size()) + " columns, got " + std::to_string(toks.size()));

        PickRecord r;
        r.x = parse_number(toks[cx], line_no);
        r.y = parse_number(toks[cy], line_no);
        if (r.x < 0 || r.y < 0)
            fail_data("row " + std::to_string(line_no) + ": negative coordinate");
        if (has_euler) {
            r.euler = std::array<double, 3>{parse_number(toks[crot], line_no),
                                            parse_number(toks[ctilt], line_no),
                                            parse_number(toks[cpsi], line_no)};
        }
        if (cfom >= 0)
            r.confidence = std::clamp(parse_number(toks[cfom], line_no), 0.0, 1.0);
        records.push_back(r);
    }
    return records;
}

std::vector<PickRecord> parse_pick_table_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("cannot open pick table: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_pick_table(ss.str());
}

} // namespace cryosim
