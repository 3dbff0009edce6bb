#include "qmdpnet/pomdp_file.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "qmdpnet/errors.hpp"

namespace qmdpnet {

namespace {

struct Token {
    std::string text;
    int line;
};

// The format is line-oriented only loosely; numbers of a row may continue on
// following lines. Tokenizing the whole file keeps the grammar simple.
std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> out;
    int line = 1;
    std::string cur;
    auto flush = [&]() {
        if (!cur.empty()) {
            out.push_back({cur, line});
            cur.clear();
        }
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '#') {
            flush();
            while (i < text.size() && text[i] != '\n') ++i;
            ++line;
            continue;
        }
        if (c == '\n') {
            flush();
            ++line;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            flush();
            continue;
        }
        if (c == ':') {
            flush();
            out.push_back({":", line});
            continue;
        }
        cur.push_back(c);
    }
    flush();
    return out;
}

[[noreturn]] void fail(int line, const std::string& msg) {
    throw FormatError("pomdp parse error at line " + std::to_string(line) + ": " + msg);
}

class Parser {
public:
    explicit Parser(const std::string& text) : toks_(tokenize(text)) {}

    TabularPomdp run() {
        while (!done()) {
            const Token& t = peek();
            if (t.text == "discount") {
                expect_kv();
                discount_ = next_number();
            } else if (t.text == "values") {
                expect_kv();
                std::string v = next().text;
                if (v != "reward" && v != "cost") fail(prev_line_, "values must be reward or cost");
                cost_ = (v == "cost");
            } else if (t.text == "states") {
                expect_kv();
                states_ = read_id_list();
            } else if (t.text == "actions") {
                expect_kv();
                actions_ = read_id_list();
            } else if (t.text == "observations") {
                expect_kv();
                obs_ = read_id_list();
            } else if (t.text == "start") {
                next();
                if (!done() && peek().text == ":") next();
                read_start();
            } else if (t.text == "T") {
                expect_kv();
                read_t();
            } else if (t.text == "O") {
                expect_kv();
                read_o();
            } else if (t.text == "R") {
                expect_kv();
                read_r();
            } else {
                fail(t.line, "unexpected token '" + t.text + "'");
            }
        }
        return build();
    }

private:
    bool done() const { return pos_ >= toks_.size(); }
    const Token& peek() const { return toks_[pos_]; }
    const Token& next() {
        if (done()) fail(prev_line_, "unexpected end of input");
        prev_line_ = toks_[pos_].line;
        return toks_[pos_++];
    }
    void expect_kv() {
        next();  // keyword
        if (done() || peek().text != ":") fail(prev_line_, "expected ':'");
        next();
    }

    bool is_number(const std::string& s) const {
        char* end = nullptr;
        std::strtod(s.c_str(), &end);
        return end && *end == '\0' && end != s.c_str();
    }

    double next_number() {
        const Token& t = next();
        char* end = nullptr;
        double v = std::strtod(t.text.c_str(), &end);
        if (!end || *end != '\0') fail(t.line, "expected a number, got '" + t.text + "'");
        return v;
    }

    std::vector<std::string> read_id_list() {
        const Token& first = next();
        std::vector<std::string> names;
        char* end = nullptr;
        long n = std::strtol(first.text.c_str(), &end, 10);
        if (end && *end == '\0') {
            if (n <= 0) fail(first.line, "count must be positive");
            for (long i = 0; i < n; ++i) names.push_back(std::to_string(i));
            return names;
        }
        names.push_back(first.text);
        while (!done() && peek().text != ":" && !is_keyword(peek().text)) {
            names.push_back(next().text);
        }
        return names;
    }

    static bool is_keyword(const std::string& s) {
        return s == "discount" || s == "values" || s == "states" || s == "actions" ||
               s == "observations" || s == "start" || s == "T" || s == "O" || s == "R";
    }

    int lookup(const std::vector<std::string>& names, const std::string& what) {
        const Token& t = next();
        if (t.text == "*") return -1;
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == t.text) return static_cast<int>(i);
        }
        char* end = nullptr;
        long v = std::strtol(t.text.c_str(), &end, 10);
        if (end && *end == '\0' && v >= 0 && v < static_cast<long>(names.size()))
            return static_cast<int>(v);
        fail(t.line, "unknown " + what + " '" + t.text + "'");
    }

    void require_spaces(int line) {
        if (states_.empty() || actions_.empty() || obs_.empty())
            fail(line, "states/actions/observations must be declared before table entries");
        if (t_vals_.empty()) {
            ns_ = static_cast<int>(states_.size());
            na_ = static_cast<int>(actions_.size());
            no_ = static_cast<int>(obs_.size());
            if (static_cast<double>(na_) * ns_ * ns_ * no_ > 2e8)
                fail(line, "model too large for the dense reader");
            t_vals_.assign(static_cast<std::size_t>(na_) * ns_ * ns_, 0.0);
            t_set_.assign(static_cast<std::size_t>(na_) * ns_, 0);
            z_vals_.assign(static_cast<std::size_t>(na_) * ns_ * no_, 0.0);
            z_set_.assign(static_cast<std::size_t>(na_) * ns_, 0);
            r_vals_.assign(static_cast<std::size_t>(na_) * ns_ * ns_ * no_, 0.0);
        }
    }

    void read_start() {
        require_spaces(prev_line_);
        if (!done() && peek().text == "uniform") {
            next();
            start_.assign(static_cast<std::size_t>(ns_), 1.0 / ns_);
            return;
        }
        // either one state id or a full distribution row
        if (!done() && !is_number(peek().text)) {
            int s = lookup(states_, "state");
            start_.assign(static_cast<std::size_t>(ns_), 0.0);
            start_[static_cast<std::size_t>(s)] = 1.0;
            return;
        }
        start_.resize(static_cast<std::size_t>(ns_));
        for (int i = 0; i < ns_; ++i) start_[static_cast<std::size_t>(i)] = next_number();
    }

    void t_assign(int a, int s, int s2, double v) {
        for (int ai = (a < 0 ? 0 : a); ai <= (a < 0 ? na_ - 1 : a); ++ai)
            for (int si = (s < 0 ? 0 : s); si <= (s < 0 ? ns_ - 1 : s); ++si) {
                t_set_[static_cast<std::size_t>(ai * ns_ + si)] = 1;
                for (int ti = (s2 < 0 ? 0 : s2); ti <= (s2 < 0 ? ns_ - 1 : s2); ++ti)
                    t_vals_[(static_cast<std::size_t>(ai) * ns_ + si) * ns_ + ti] = v;
            }
    }

    void read_t() {
        require_spaces(prev_line_);
        int a = lookup(actions_, "action");
        if (!done() && peek().text == ":") {
            next();
            int s = lookup(states_, "state");
            if (!done() && peek().text == ":") {
                next();
                int s2 = lookup(states_, "state");
                t_assign(a, s, s2, next_number());
                return;
            }
            for (int s2 = 0; s2 < ns_; ++s2) t_assign(a, s, s2, next_number());
            return;
        }
        if (!done() && peek().text == "identity") {
            next();
            for (int s = 0; s < ns_; ++s)
                for (int s2 = 0; s2 < ns_; ++s2) t_assign(a, s, s2, s == s2 ? 1.0 : 0.0);
            return;
        }
        if (!done() && peek().text == "uniform") {
            next();
            t_assign(a, -1, -1, 1.0 / ns_);
            return;
        }
        for (int s = 0; s < ns_; ++s)
            for (int s2 = 0; s2 < ns_; ++s2) t_assign(a, s, s2, next_number());
    }

    void z_assign(int a, int s2, int o, double v) {
        for (int ai = (a < 0 ? 0 : a); ai <= (a < 0 ? na_ - 1 : a); ++ai)
            for (int si = (s2 < 0 ? 0 : s2); si <= (s2 < 0 ? ns_ - 1 : s2); ++si) {
                z_set_[static_cast<std::size_t>(ai * ns_ + si)] = 1;
                for (int oi = (o < 0 ? 0 : o); oi <= (o < 0 ? no_ - 1 : o); ++oi)
                    z_vals_[(static_cast<std::size_t>(ai) * ns_ + si) * no_ + oi] = v;
            }
    }

    void read_o() {
        require_spaces(prev_line_);
        int a = lookup(actions_, "action");
        if (!done() && peek().text == ":") {
            next();
            int s2 = lookup(states_, "state");
            if (!done() && peek().text == ":") {
                next();
                int o = lookup(obs_, "observation");
                z_assign(a, s2, o, next_number());
                return;
            }
            for (int o = 0; o < no_; ++o) z_assign(a, s2, o, next_number());
            return;
        }
        if (!done() && peek().text == "uniform") {
            next();
            z_assign(a, -1, -1, 1.0 / no_);
            return;
        }
        for (int s2 = 0; s2 < ns_; ++s2)
            for (int o = 0; o < no_; ++o) z_assign(a, s2, o, next_number());
    }

    void r_assign(int a, int s, int s2, int o, double v) {
        for (int ai = (a < 0 ? 0 : a); ai <= (a < 0 ? na_ - 1 : a); ++ai)
            for (int si = (s < 0 ? 0 : s); si <= (s < 0 ? ns_ - 1 : s); ++si)
                for (int ti = (s2 < 0 ? 0 : s2); ti <= (s2 < 0 ? ns_ - 1 : s2); ++ti)
                    for (int oi = (o < 0 ? 0 : o); oi <= (o < 0 ? no_ - 1 : o); ++oi)
                        r_vals_[((static_cast<std::size_t>(ai) * ns_ + si) * ns_ + ti) * no_ + oi] = v;
    }

    void read_r() {
        require_spaces(prev_line_);
        int a = lookup(actions_, "action");
        if (done() || peek().text != ":") fail(prev_line_, "R entry requires ': state'");
        next();
        int s = lookup(states_, "state");
        if (done() || peek().text != ":") fail(prev_line_, "R entry requires ': end-state'");
        next();
        int s2 = lookup(states_, "state");
        if (!done() && peek().text == ":") {
            next();
            int o = lookup(obs_, "observation");
            r_assign(a, s, s2, o, next_number());
            return;
        }
        for (int o = 0; o < no_; ++o) r_assign(a, s, s2, o, next_number());
    }

    TabularPomdp build() {
        if (states_.empty() || actions_.empty() || obs_.empty())
            fail(prev_line_, "missing states/actions/observations declaration");
        require_spaces(prev_line_);
        TabularPomdp m(ns_, na_, no_);
        m.gamma = discount_ > 0.0 ? discount_ : 0.95;

        for (int a = 0; a < na_; ++a) {
            for (int s = 0; s < ns_; ++s) {
                const bool set = t_set_[static_cast<std::size_t>(a * ns_ + s)] != 0;
                double sum = 0.0;
                for (int s2 = 0; s2 < ns_; ++s2)
                    sum += t_vals_[(static_cast<std::size_t>(a) * ns_ + s) * ns_ + s2];
                if (!set) {
                    m.add_t(a, s, s, 1.0);  // unspecified rows default to identity
                    continue;
                }
                if (std::fabs(sum - 1.0) > 1e-6)
                    throw FormatError("pomdp: T row does not normalize (action " +
                                      actions_[static_cast<std::size_t>(a)] + ", state " +
                                      states_[static_cast<std::size_t>(s)] + ", sum " +
                                      std::to_string(sum) + ")");
                // rows already normalized to machine precision stay untouched
                const double t_scale = std::fabs(sum - 1.0) > 1e-12 ? sum : 1.0;
                for (int s2 = 0; s2 < ns_; ++s2)
                    m.add_t(a, s, s2,
                            t_vals_[(static_cast<std::size_t>(a) * ns_ + s) * ns_ + s2] / t_scale);
            }
        }
        for (int a = 0; a < na_; ++a) {
            for (int s2 = 0; s2 < ns_; ++s2) {
                const bool set = z_set_[static_cast<std::size_t>(a * ns_ + s2)] != 0;
                double sum = 0.0;
                for (int o = 0; o < no_; ++o)
                    sum += z_vals_[(static_cast<std::size_t>(a) * ns_ + s2) * no_ + o];
                if (!set) {
                    for (int o = 0; o < no_; ++o) m.z(a, s2, o) = 1.0 / no_;  // default uniform
                    continue;
                }
                if (std::fabs(sum - 1.0) > 1e-6)
                    throw FormatError("pomdp: O row does not normalize (action " +
                                      actions_[static_cast<std::size_t>(a)] + ", state " +
                                      states_[static_cast<std::size_t>(s2)] + ", sum " +
                                      std::to_string(sum) + ")");
                const double z_scale = std::fabs(sum - 1.0) > 1e-12 ? sum : 1.0;
                for (int o = 0; o < no_; ++o)
                    m.z(a, s2, o) =
                        z_vals_[(static_cast<std::size_t>(a) * ns_ + s2) * no_ + o] / z_scale;
            }
        }
        // Collapse r(a,s,s',o) into the expected immediate reward R(s,a).
        const double sign = cost_ ? -1.0 : 1.0;
        for (int s = 0; s < ns_; ++s) {
            for (int a = 0; a < na_; ++a) {
                double acc = 0.0;
                for (int s2 = 0; s2 < ns_; ++s2) {
                    const double tp = m.t(a, s, s2);
                    if (tp == 0.0) continue;
                    double inner = 0.0;
                    for (int o = 0; o < no_; ++o)
                        inner += m.z(a, s2, o) *
                                 r_vals_[((static_cast<std::size_t>(a) * ns_ + s) * ns_ + s2) * no_ + o];
                    acc += tp * inner;
                }
                m.r(s, a) = sign * acc;
            }
        }
        for (int s = 0; s < ns_; ++s) {
            bool absorbing = true;
            for (int a = 0; a < na_; ++a)
                if (std::fabs(m.t(a, s, s) - 1.0) > 1e-12) absorbing = false;
            m.terminal[static_cast<std::size_t>(s)] = absorbing ? 1 : 0;
        }
        m.start = start_;
        m.finalize();
        return m;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    int prev_line_ = 1;

    double discount_ = 0.0;
    bool cost_ = false;
    std::vector<std::string> states_, actions_, obs_;
    int ns_ = 0, na_ = 0, no_ = 0;
    std::vector<double> t_vals_, z_vals_, r_vals_;
    std::vector<std::uint8_t> t_set_, z_set_;
    std::vector<double> start_;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

TabularPomdp parse_pomdp_text(const std::string& text) { return Parser(text).run(); }

TabularPomdp parse_pomdp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open pomdp file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_pomdp_text(ss.str());
}

std::string write_pomdp_text(const TabularPomdp& m) {
    std::ostringstream os;
    os << "discount: " << fmt(m.gamma) << "\n";
    os << "values: reward\n";
    os << "states: " << m.n_states() << "\n";
    os << "actions: " << m.n_actions() << "\n";
    os << "observations: " << m.n_obs() << "\n";
    if (!m.start.empty()) {
        os << "start:";
        for (double p : m.start) os << " " << fmt(p);
        os << "\n";
    }
    os << "\n";
    for (int a = 0; a < m.n_actions(); ++a) {
        os << "T: " << a << "\n";
        for (int s = 0; s < m.n_states(); ++s) {
            for (int s2 = 0; s2 < m.n_states(); ++s2) os << (s2 ? " " : "") << fmt(m.t(a, s, s2));
            os << "\n";
        }
        os << "\n";
    }
    for (int a = 0; a < m.n_actions(); ++a) {
        os << "O: " << a << "\n";
        for (int s2 = 0; s2 < m.n_states(); ++s2) {
            for (int o = 0; o < m.n_obs(); ++o) os << (o ? " " : "") << fmt(m.z(a, s2, o));
            os << "\n";
        }
        os << "\n";
    }
    // R(s,a) is emitted on the end-state/observation wildcard: the expected
    // immediate reward collapses back to itself when re-read.
    for (int a = 0; a < m.n_actions(); ++a)
        for (int s = 0; s < m.n_states(); ++s)
            if (m.r(s, a) != 0.0)
                os << "R: " << a << " : " << s << " : * : * " << fmt(m.r(s, a)) << "\n";
    return os.str();
}

void write_pomdp_file(const TabularPomdp& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write pomdp file: " + path);
    out << write_pomdp_text(model);
}

}  // namespace qmdpnet
