#pragma once

// Tokenizer and statement parser for the Python subset the miner walks:
// imports, assignments, calls, literal-bounded for loops, if/elif/else,
// def blocks, return. Everything else parses to an opaque statement so
// the extractor can skip it with a diagnostic instead of failing.

#include <cctype>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "nascur/errors.hpp"

namespace nascur::pysrc {

// ---------------------------------------------------------------------------
// Tokens and logical lines

struct Token {
    enum Kind { Name, Int, Float, Str, Op, End };
    Kind kind = End;
    std::string text;
    std::int64_t ival = 0;
    double fval = 0.0;

    bool is_op(const char* s) const { return kind == Op && text == s; }
    bool is_name(const char* s) const { return kind == Name && text == s; }
};

struct LogicalLine {
    int indent = 0;
    int lineno = 0;
    std::vector<Token> toks;
};

namespace detail {

inline bool name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace detail

// Splits source into logical lines: comments removed, blank lines
// dropped, newlines joined inside brackets and after backslash.
inline std::vector<LogicalLine> tokenize(const std::string& text) {
    std::vector<LogicalLine> lines;
    std::size_t i = 0;
    const std::size_t n = text.size();
    int lineno = 1;

    while (i < n) {
        // Measure indentation of a fresh physical line.
        int indent = 0;
        while (i < n && (text[i] == ' ' || text[i] == '\t')) {
            indent += text[i] == '\t' ? 4 : 1;
            ++i;
        }
        if (i < n && (text[i] == '\n' || text[i] == '\r' || text[i] == '#')) {
            while (i < n && text[i] != '\n') ++i;
            if (i < n) ++i;
            ++lineno;
            continue;
        }
        if (i >= n) break;

        LogicalLine line;
        line.indent = indent;
        line.lineno = lineno;
        int depth = 0;

        while (i < n) {
            char c = text[i];
            if (c == '\n') {
                ++lineno;
                ++i;
                if (depth > 0) continue;  // implicit joining inside brackets
                break;
            }
            if (c == ' ' || c == '\t' || c == '\r') { ++i; continue; }
            if (c == '#') {
                while (i < n && text[i] != '\n') ++i;
                continue;
            }
            if (c == '\\' && i + 1 < n && (text[i + 1] == '\n' || text[i + 1] == '\r')) {
                while (i < n && text[i] != '\n') ++i;
                if (i < n) { ++i; ++lineno; }
                continue;
            }
            if (detail::name_start(c)) {
                std::size_t j = i;
                while (j < n && detail::name_char(text[j])) ++j;
                std::string word = text.substr(i, j - i);
                // String prefixes (r'', f"", b'' ...) collapse onto the string.
                bool prefix = word.size() <= 2 && j < n && (text[j] == '\'' || text[j] == '"');
                if (prefix) {
                    for (char p : word)
                        if (std::string("rbfuRBFU").find(p) == std::string::npos) prefix = false;
                }
                if (!prefix) {
                    line.toks.push_back({Token::Name, std::move(word)});
                    i = j;
                    continue;
                }
                i = j;
                c = text[i];
            }
            if (c == '\'' || c == '"') {
                const char q = c;
                bool triple = i + 2 < n && text[i + 1] == q && text[i + 2] == q;
                std::string value;
                if (triple) {
                    i += 3;
                    while (i + 2 < n && !(text[i] == q && text[i + 1] == q && text[i + 2] == q)) {
                        if (text[i] == '\n') ++lineno;
                        value += text[i++];
                    }
                    if (i + 2 >= n) throw Error(errkind::parse_failure, "unterminated string");
                    i += 3;
                } else {
                    ++i;
                    while (i < n && text[i] != q) {
                        if (text[i] == '\n') throw Error(errkind::parse_failure, "unterminated string");
                        if (text[i] == '\\' && i + 1 < n) { value += text[i + 1]; i += 2; continue; }
                        value += text[i++];
                    }
                    if (i >= n) throw Error(errkind::parse_failure, "unterminated string");
                    ++i;
                }
                line.toks.push_back({Token::Str, std::move(value)});
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
                std::size_t j = i;
                bool is_float = false;
                if (text[j] == '0' && j + 1 < n && (text[j + 1] == 'x' || text[j + 1] == 'X')) {
                    j += 2;
                    while (j < n && std::isxdigit(static_cast<unsigned char>(text[j]))) ++j;
                } else {
                    while (j < n && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
                    if (j < n && text[j] == '.') {
                        is_float = true;
                        ++j;
                        while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
                    }
                    if (j < n && (text[j] == 'e' || text[j] == 'E')) {
                        std::size_t k = j + 1;
                        if (k < n && (text[k] == '+' || text[k] == '-')) ++k;
                        if (k < n && std::isdigit(static_cast<unsigned char>(text[k]))) {
                            is_float = true;
                            j = k;
                            while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
                        }
                    }
                }
                std::string num = text.substr(i, j - i);
                std::erase(num, '_');
                Token t;
                if (is_float) {
                    t.kind = Token::Float;
                    t.fval = std::stod(num);
                } else {
                    t.kind = Token::Int;
                    t.ival = std::stoll(num, nullptr, 0);
                }
                t.text = std::move(num);
                line.toks.push_back(std::move(t));
                i = j;
                continue;
            }
            // Operators; multi-char first.
            static const char* two[] = {"**", "//", "==", "!=", "<=", ">=", "->", "+=",
                                        "-=", "*=", "/=", "|=", "&=", "^=", ">>", "<<"};
            std::string op(1, c);
            if (i + 1 < n) {
                std::string pair = text.substr(i, 2);
                for (const char* t2 : two)
                    if (pair == t2) { op = pair; break; }
            }
            if (op == "(" || op == "[" || op == "{") ++depth;
            if (op == ")" || op == "]" || op == "}") --depth;
            line.toks.push_back({Token::Op, op});
            i += op.size();
        }
        if (!line.toks.empty()) lines.push_back(std::move(line));
    }
    return lines;
}

// ---------------------------------------------------------------------------
// Expressions

struct Expr {
    enum Kind { Int, Float, Str, Name, Sequence, Call, Attr, Opaque };
    Kind kind = Opaque;
    std::int64_t ival = 0;
    double fval = 0.0;
    std::string text;                 // Name / Str / Attr member
    std::vector<Expr> elts;           // Sequence elements
    std::shared_ptr<Expr> base;       // Call callee, Attr value
    std::vector<Expr> args;
    std::vector<std::pair<std::string, Expr>> kwargs;

    // Dotted path of a name/attribute chain ("keras.layers.Conv2D"),
    // empty if the expression is not a plain chain.
    std::string dotted() const {
        if (kind == Name) return text;
        if (kind == Attr && base) {
            std::string head = base->dotted();
            if (head.empty()) return "";
            return head + "." + text;
        }
        return "";
    }
    // Last path segment ("Conv2D"), empty when not a chain.
    std::string tail() const {
        if (kind == Name) return text;
        if (kind == Attr) return text;
        return "";
    }
};

namespace detail {

class ExprParser {
public:
    ExprParser(const std::vector<Token>& toks, std::size_t pos) : toks_(toks), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ >= toks_.size(); }
    const Token& peek() const {
        static const Token end{};
        return pos_ < toks_.size() ? toks_[pos_] : end;
    }

    Expr parse() { return parse_binary(); }

private:
    const std::vector<Token>& toks_;
    std::size_t pos_;

    Token next() { return toks_[pos_++]; }

    bool at_binop() const {
        const Token& t = peek();
        if (t.kind == Token::Op) {
            static const char* ops[] = {"+", "-", "*", "/", "%", "**", "//", "==", "!=",
                                        "<", ">", "<=", ">=", "|", "&", "^", ">>", "<<"};
            for (const char* o : ops)
                if (t.text == o) return true;
            return false;
        }
        return t.is_name("and") || t.is_name("or") || t.is_name("in") || t.is_name("not") ||
               t.is_name("is") || t.is_name("if") || t.is_name("else");
    }

    Expr parse_binary() {
        Expr lhs = parse_unary();
        bool opaque = false;
        while (!done() && at_binop()) {
            next();
            parse_unary();
            opaque = true;
        }
        if (opaque) {
            Expr e;
            e.kind = Expr::Opaque;
            return e;
        }
        return lhs;
    }

    Expr parse_unary() {
        if (peek().is_op("-")) {
            next();
            Expr inner = parse_unary();
            if (inner.kind == Expr::Int) { inner.ival = -inner.ival; return inner; }
            if (inner.kind == Expr::Float) { inner.fval = -inner.fval; return inner; }
            Expr e;
            e.kind = Expr::Opaque;
            return e;
        }
        if (peek().is_op("+")) { next(); return parse_unary(); }
        if (peek().is_name("not") || peek().is_name("lambda")) {
            // Consume conservatively to the end of the enclosing expression.
            while (!done() && !peek().is_op(",") && !peek().is_op(")") && !peek().is_op("]") &&
                   !peek().is_op("}") && !peek().is_op(":"))
                next();
            Expr e;
            e.kind = Expr::Opaque;
            return e;
        }
        return parse_postfix();
    }

    Expr parse_postfix() {
        Expr e = parse_primary();
        while (!done()) {
            if (peek().is_op(".")) {
                next();
                if (peek().kind != Token::Name) return opaque_rest();
                Expr attr;
                attr.kind = Expr::Attr;
                attr.text = next().text;
                attr.base = std::make_shared<Expr>(std::move(e));
                e = std::move(attr);
            } else if (peek().is_op("(")) {
                next();
                Expr call;
                call.kind = Expr::Call;
                call.base = std::make_shared<Expr>(std::move(e));
                parse_args(call);
                e = std::move(call);
            } else if (peek().is_op("[")) {
                // Subscripts are opaque; skip the balanced bracket group.
                skip_group("[", "]");
                Expr o;
                o.kind = Expr::Opaque;
                e = std::move(o);
            } else {
                break;
            }
        }
        return e;
    }

    void parse_args(Expr& call) {
        while (!done() && !peek().is_op(")")) {
            if (peek().kind == Token::Name && pos_ + 1 < toks_.size() &&
                toks_[pos_ + 1].is_op("=")) {
                std::string key = next().text;
                next();
                call.kwargs.emplace_back(std::move(key), parse_binary());
            } else if (peek().is_op("*") || peek().is_op("**")) {
                next();
                parse_binary();
                call.args.push_back(Expr{});  // unpacking: opaque argument
            } else {
                call.args.push_back(parse_binary());
            }
            if (peek().is_op(",")) next();
        }
        if (peek().is_op(")")) next();
    }

    Expr parse_primary() {
        const Token& t = peek();
        switch (t.kind) {
            case Token::Int: {
                Expr e;
                e.kind = Expr::Int;
                e.ival = next().ival;
                return e;
            }
            case Token::Float: {
                Expr e;
                e.kind = Expr::Float;
                e.fval = next().fval;
                return e;
            }
            case Token::Str: {
                Expr e;
                e.kind = Expr::Str;
                e.text = next().text;
                return e;
            }
            case Token::Name: {
                Expr e;
                e.kind = Expr::Name;
                e.text = next().text;
                if (e.text == "True" || e.text == "False" || e.text == "None")
                    e.kind = Expr::Opaque;  // outside the literal domain
                return e;
            }
            case Token::Op: {
                if (t.text == "(" || t.text == "[") {
                    const std::string open = t.text;
                    const std::string close = open == "(" ? ")" : "]";
                    next();
                    Expr seq;
                    seq.kind = Expr::Sequence;
                    bool saw_comma = false;
                    while (!done() && !peek().is_op(close.c_str())) {
                        seq.elts.push_back(parse_binary());
                        if (peek().is_op(",")) { next(); saw_comma = true; }
                    }
                    if (peek().is_op(close.c_str())) next();
                    // A parenthesized single expression is not a tuple.
                    if (open == "(" && seq.elts.size() == 1 && !saw_comma)
                        return std::move(seq.elts[0]);
                    return seq;
                }
                if (t.text == "{") {
                    skip_group("{", "}");
                    Expr e;
                    e.kind = Expr::Opaque;
                    return e;
                }
                next();
                Expr e;
                e.kind = Expr::Opaque;
                return e;
            }
            default: {
                Expr e;
                e.kind = Expr::Opaque;
                return e;
            }
        }
    }

    void skip_group(const char* open, const char* close) {
        int depth = 0;
        while (!done()) {
            if (peek().is_op(open)) ++depth;
            if (peek().is_op(close)) {
                --depth;
                next();
                if (depth == 0) return;
                continue;
            }
            next();
        }
    }

    Expr opaque_rest() {
        pos_ = toks_.size();
        Expr e;
        e.kind = Expr::Opaque;
        return e;
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Statements

struct Stmt {
    enum Kind { Import, Assign, ExprStmt, FuncDef, For, If, While, Return, ClassDef, With, Try, Other };
    Kind kind = Other;
    int lineno = 0;

    std::vector<std::string> modules;  // Import: qualified names

    std::string target;                // Assign target / For variable / def name
    Expr value;                        // Assign value / ExprStmt / Return / For iterable

    std::vector<std::string> params;               // FuncDef parameters
    std::vector<std::pair<std::string, Expr>> defaults;

    std::vector<std::vector<Stmt>> arms;  // If: one block per if/elif arm
    bool has_else = false;
    std::vector<Stmt> body;               // FuncDef / For / While / With / Try / Class / else
};

namespace detail {

struct BlockParser {
    const std::vector<LogicalLine>& lines;
    std::size_t pos = 0;

    std::vector<Stmt> parse_block(int indent) {
        std::vector<Stmt> out;
        while (pos < lines.size() && lines[pos].indent >= indent) {
            if (lines[pos].indent > indent) {
                // Unexpected deeper indent (e.g. continuation we mis-split); skip.
                ++pos;
                continue;
            }
            out.push_back(parse_stmt(indent));
        }
        return out;
    }

    Stmt parse_stmt(int indent) {
        const LogicalLine& line = lines[pos];
        const auto& toks = line.toks;
        Stmt s;
        s.lineno = line.lineno;
        const Token& head = toks.front();

        auto parse_suite = [&](std::size_t colon_idx) -> std::vector<Stmt> {
            if (colon_idx + 1 < toks.size()) {
                // Inline suite after the colon: exactly one simple statement.
                LogicalLine sub = line;
                sub.toks.assign(toks.begin() + colon_idx + 1, toks.end());
                std::vector<LogicalLine> tmp{std::move(sub)};
                BlockParser inner{tmp, 0};
                ++pos;
                return inner.parse_block(0);
            }
            ++pos;
            if (pos < lines.size() && lines[pos].indent > indent)
                return parse_block(lines[pos].indent);
            return {};
        };

        auto find_colon = [&]() -> std::size_t {
            int depth = 0;
            for (std::size_t k = 0; k < toks.size(); ++k) {
                if (toks[k].is_op("(") || toks[k].is_op("[") || toks[k].is_op("{")) ++depth;
                if (toks[k].is_op(")") || toks[k].is_op("]") || toks[k].is_op("}")) --depth;
                if (depth == 0 && toks[k].is_op(":")) return k;
            }
            return toks.size();
        };

        if (head.is_name("import") || head.is_name("from")) {
            s.kind = Stmt::Import;
            parse_import(toks, s.modules);
            ++pos;
            return s;
        }
        if (head.is_name("def")) {
            s.kind = Stmt::FuncDef;
            std::size_t k = 1;
            if (k < toks.size() && toks[k].kind == Token::Name) s.target = toks[k++].text;
            if (k < toks.size() && toks[k].is_op("(")) {
                ++k;
                while (k < toks.size() && !toks[k].is_op(")")) {
                    if (toks[k].kind == Token::Name) {
                        std::string p = toks[k].text;
                        s.params.push_back(p);
                        if (k + 1 < toks.size() && toks[k + 1].is_op("=")) {
                            detail::ExprParser ep(toks, k + 2);
                            s.defaults.emplace_back(p, ep.parse());
                            k = ep.pos();
                            continue;
                        }
                    }
                    ++k;
                }
            }
            s.body = parse_suite(find_colon());
            return s;
        }
        if (head.is_name("for")) {
            s.kind = Stmt::For;
            std::size_t k = 1;
            if (k < toks.size() && toks[k].kind == Token::Name) s.target = toks[k++].text;
            if (k < toks.size() && toks[k].is_name("in")) {
                detail::ExprParser ep(toks, k + 1);
                s.value = ep.parse();
            }
            s.body = parse_suite(find_colon());
            return s;
        }
        if (head.is_name("if")) {
            s.kind = Stmt::If;
            s.arms.push_back(parse_suite(find_colon()));
            while (pos < lines.size() && lines[pos].indent == indent &&
                   (lines[pos].toks.front().is_name("elif") ||
                    lines[pos].toks.front().is_name("else"))) {
                bool is_else = lines[pos].toks.front().is_name("else");
                const LogicalLine& arm_line = lines[pos];
                int depth = 0;
                std::size_t colon = arm_line.toks.size();
                for (std::size_t k = 0; k < arm_line.toks.size(); ++k) {
                    if (arm_line.toks[k].is_op("(")) ++depth;
                    if (arm_line.toks[k].is_op(")")) --depth;
                    if (depth == 0 && arm_line.toks[k].is_op(":")) { colon = k; break; }
                }
                std::vector<Stmt> arm;
                if (colon + 1 < arm_line.toks.size()) {
                    LogicalLine sub = arm_line;
                    sub.toks.assign(arm_line.toks.begin() + colon + 1, arm_line.toks.end());
                    std::vector<LogicalLine> tmp{std::move(sub)};
                    BlockParser inner{tmp, 0};
                    ++pos;
                    arm = inner.parse_block(0);
                } else {
                    ++pos;
                    if (pos < lines.size() && lines[pos].indent > indent)
                        arm = parse_block(lines[pos].indent);
                }
                if (is_else) {
                    s.has_else = true;
                    s.body = std::move(arm);
                    break;
                }
                s.arms.push_back(std::move(arm));
            }
            return s;
        }
        if (head.is_name("while")) {
            s.kind = Stmt::While;
            s.body = parse_suite(find_colon());
            return s;
        }
        if (head.is_name("with")) {
            s.kind = Stmt::With;
            s.body = parse_suite(find_colon());
            return s;
        }
        if (head.is_name("try") || head.is_name("except") || head.is_name("finally")) {
            s.kind = Stmt::Try;
            s.body = parse_suite(find_colon());
            return s;
        }
        if (head.is_name("class")) {
            s.kind = Stmt::ClassDef;
            if (toks.size() > 1 && toks[1].kind == Token::Name) s.target = toks[1].text;
            s.body = parse_suite(find_colon());
            return s;
        }
        if (head.is_name("return")) {
            s.kind = Stmt::Return;
            if (toks.size() > 1) {
                detail::ExprParser ep(toks, 1);
                s.value = ep.parse();
            }
            ++pos;
            return s;
        }
        if (head.is_name("pass") || head.is_name("break") || head.is_name("continue") ||
            head.is_name("del") || head.is_name("global") || head.is_name("nonlocal") ||
            head.is_name("assert") || head.is_name("raise") || head.is_name("print")) {
            s.kind = Stmt::Other;
            ++pos;
            return s;
        }

        // Assignment: NAME (.NAME)* = expr, a single '=' at depth 0.
        {
            int depth = 0;
            std::size_t eq = toks.size();
            int eq_count = 0;
            for (std::size_t k = 0; k < toks.size(); ++k) {
                if (toks[k].is_op("(") || toks[k].is_op("[") || toks[k].is_op("{")) ++depth;
                if (toks[k].is_op(")") || toks[k].is_op("]") || toks[k].is_op("}")) --depth;
                if (depth == 0 && toks[k].is_op("=")) {
                    if (eq_count == 0) eq = k;
                    ++eq_count;
                }
            }
            if (eq_count == 1 && eq > 0) {
                bool plain_target = true;
                std::string target;
                for (std::size_t k = 0; k < eq; ++k) {
                    if (k % 2 == 0) {
                        if (toks[k].kind != Token::Name) { plain_target = false; break; }
                        target += toks[k].text;
                    } else {
                        if (!toks[k].is_op(".")) { plain_target = false; break; }
                        target += ".";
                    }
                }
                if (plain_target && eq % 2 == 1) {
                    s.kind = Stmt::Assign;
                    s.target = target;
                    detail::ExprParser ep(toks, eq + 1);
                    s.value = ep.parse();
                    ++pos;
                    return s;
                }
            }
        }

        // Fall through: expression statement.
        detail::ExprParser ep(toks, 0);
        s.value = ep.parse();
        s.kind = Stmt::ExprStmt;
        ++pos;
        return s;
    }

    static void parse_import(const std::vector<Token>& toks, std::vector<std::string>& out) {
        std::size_t k = 1;
        auto read_dotted = [&]() {
            std::string path;
            while (k < toks.size() && toks[k].kind == Token::Name) {
                path += toks[k++].text;
                if (k < toks.size() && toks[k].is_op(".")) {
                    path += ".";
                    ++k;
                } else {
                    break;
                }
            }
            return path;
        };
        if (toks.front().is_name("import")) {
            while (k < toks.size()) {
                std::string path = read_dotted();
                if (!path.empty()) out.push_back(path);
                if (k < toks.size() && toks[k].is_name("as")) k += 2;
                if (k < toks.size() && toks[k].is_op(",")) ++k;
                else break;
            }
        } else {  // from X import a, b as c
            std::string base = read_dotted();
            if (k < toks.size() && toks[k].is_name("import")) {
                ++k;
                while (k < toks.size()) {
                    if (toks[k].is_op("*")) {
                        out.push_back(base + ".*");
                        break;
                    }
                    if (toks[k].kind != Token::Name) break;
                    out.push_back(base + "." + toks[k].text);
                    ++k;
                    if (k < toks.size() && toks[k].is_name("as")) k += 2;
                    if (k < toks.size() && toks[k].is_op(",")) ++k;
                    else break;
                }
            }
        }
    }
};

}  // namespace detail

// Parses a whole program. Throws Error(ParseFailure) on lexical errors.
inline std::vector<Stmt> parse_program(const std::string& text) {
    auto lines = tokenize(text);
    detail::BlockParser bp{lines, 0};
    return bp.parse_block(0);
}

}  // namespace nascur::pysrc
