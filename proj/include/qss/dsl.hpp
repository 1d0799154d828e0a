#pragma once

// A small line-oriented language for ODE models (.qssm files):
//
//   model <name>
//   state <id> = <number>
//   param <id> [= <number>] [nonneg]
//   d<id>/dt = <expr>
//
// Statements end at a newline or ';'. '#' starts a comment. Expression
// precedence, loosest first: + - (left), * / (left), unary -, ^ (right).
// The full grammar is in models/grammar.ebnf.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qss/error.hpp"
#include "qss/model.hpp"

namespace qss::dsl {

struct SourceLocation {
    std::size_t line = 1;
    std::size_t column = 1;

    friend bool operator==(const SourceLocation&, const SourceLocation&) = default;
};

inline std::string to_string(const SourceLocation& loc) {
    return "line " + std::to_string(loc.line) + ", column " + std::to_string(loc.column);
}

class ParseError : public Error {
public:
    ParseError(SourceLocation loc, std::string found, std::vector<std::string> expected)
        : Error(format(loc, found, expected)), loc_(loc), found_(std::move(found)), expected_(std::move(expected)) {}

    const SourceLocation& location() const noexcept { return loc_; }
    const std::string& found() const noexcept { return found_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    static std::string format(const SourceLocation& loc, const std::string& found,
                              const std::vector<std::string>& expected) {
        std::string msg = to_string(loc) + ": unexpected " + found;
        if (!expected.empty()) {
            msg += "; expected ";
            if (expected.size() > 1) msg += "one of ";
            for (std::size_t i = 0; i < expected.size(); ++i) {
                if (i > 0) msg += ", ";
                msg += expected[i];
            }
        }
        return msg;
    }

    SourceLocation loc_;
    std::string found_;
    std::vector<std::string> expected_;
};

struct Diagnostic {
    SourceLocation location;
    std::string message;
};

/// Every semantic offense in a definition, reported together.
class SemanticError : public Error {
public:
    explicit SemanticError(std::vector<Diagnostic> diagnostics)
        : Error(format(diagnostics)), diagnostics_(std::move(diagnostics)) {}

    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    static std::string format(const std::vector<Diagnostic>& ds) {
        std::string msg;
        for (const auto& d : ds) {
            if (!msg.empty()) msg += "\n";
            msg += to_string(d.location) + ": " + d.message;
        }
        return msg;
    }

    std::vector<Diagnostic> diagnostics_;
};

class BindingError : public Error {
public:
    BindingError(SourceLocation loc, const std::string& name)
        : Error(to_string(loc) + ": unbound identifier '" + name + "'"), loc_(loc) {}
    const SourceLocation& location() const noexcept { return loc_; }

private:
    SourceLocation loc_;
};

class EvaluationError : public Error {
public:
    EvaluationError(SourceLocation loc, const std::string& what) : Error(to_string(loc) + ": " + what), loc_(loc) {}
    const SourceLocation& location() const noexcept { return loc_; }

private:
    SourceLocation loc_;
};

/// Expression tree node. Children are held by value.
struct Expr {
    enum class Kind { number, identifier, negate, binary, call };

    Kind kind = Kind::number;
    double number = 0.0;
    std::string name;  ///< identifier or function name
    char op = 0;       ///< one of + - * / ^ for binary nodes
    std::vector<Expr> args;
    SourceLocation loc;
};

/// Structural equality ignoring source locations.
inline bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
    switch (a.kind) {
        case Expr::Kind::number:
            if (!(a.number == b.number) && !(std::isnan(a.number) && std::isnan(b.number))) return false;
            break;
        case Expr::Kind::identifier:
        case Expr::Kind::call:
            if (a.name != b.name) return false;
            break;
        case Expr::Kind::binary:
            if (a.op != b.op) return false;
            break;
        case Expr::Kind::negate: break;
    }
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (!structurally_equal(a.args[i], b.args[i])) return false;
    }
    return true;
}

struct StateDecl {
    std::string name;
    double initial = 0.0;
    SourceLocation loc;
};

struct ParamDecl {
    std::string name;
    std::optional<double> default_value;
    bool nonneg = false;
    SourceLocation loc;
};

struct Equation {
    std::string state;
    Expr rhs;
    SourceLocation loc;
};

/// A validated model: one equation per state, in state declaration order.
struct ModelDefinition {
    std::string name = "unnamed";
    std::vector<StateDecl> states;
    std::vector<ParamDecl> params;
    std::vector<Equation> equations;
};

inline bool structurally_equal(const ModelDefinition& a, const ModelDefinition& b) {
    if (a.name != b.name || a.states.size() != b.states.size() || a.params.size() != b.params.size() ||
        a.equations.size() != b.equations.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.states.size(); ++i) {
        if (a.states[i].name != b.states[i].name || a.states[i].initial != b.states[i].initial) return false;
    }
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        if (a.params[i].name != b.params[i].name || a.params[i].default_value != b.params[i].default_value ||
            a.params[i].nonneg != b.params[i].nonneg) {
            return false;
        }
    }
    for (std::size_t i = 0; i < a.equations.size(); ++i) {
        if (a.equations[i].state != b.equations[i].state || !structurally_equal(a.equations[i].rhs, b.equations[i].rhs)) {
            return false;
        }
    }
    return true;
}

inline constexpr std::string_view kTimeSymbol = "t";

/// Arity of a built-in function, or nullopt for unknown names.
inline std::optional<std::size_t> function_arity(std::string_view name) {
    if (name == "exp" || name == "ln" || name == "sqrt" || name == "tanh") return 1;
    if (name == "min" || name == "max") return 2;
    return std::nullopt;
}

namespace detail {

enum class Tok { ident, number, plus, minus, star, slash, caret, lparen, rparen, comma, equals, end_stmt, eof };

struct Token {
    Tok kind;
    std::string text;
    double value = 0.0;
    SourceLocation loc;
};

inline std::string describe(Tok t) {
    switch (t) {
        case Tok::ident: return "identifier";
        case Tok::number: return "number";
        case Tok::plus: return "'+'";
        case Tok::minus: return "'-'";
        case Tok::star: return "'*'";
        case Tok::slash: return "'/'";
        case Tok::caret: return "'^'";
        case Tok::lparen: return "'('";
        case Tok::rparen: return "')'";
        case Tok::comma: return "','";
        case Tok::equals: return "'='";
        case Tok::end_stmt: return "end of statement";
        case Tok::eof: return "end of input";
    }
    return "?";
}

inline std::string describe(const Token& tok) {
    switch (tok.kind) {
        case Tok::ident: return "identifier '" + tok.text + "'";
        case Tok::number: return "number " + tok.text;
        case Tok::end_stmt: return tok.text == ";" ? std::string("';'") : std::string("end of line");
        default: return describe(tok.kind);
    }
}

inline bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> lex(std::string_view src) {
    std::vector<Token> tokens;
    std::size_t i = 0, line = 1, col = 1;
    auto advance = [&](std::size_t n) {
        i += n;
        col += n;
    };
    while (i < src.size()) {
        const char c = src[i];
        const SourceLocation loc{line, col};
        if (c == ' ' || c == '\t' || c == '\r') {
            advance(1);
        } else if (c == '#') {
            while (i < src.size() && src[i] != '\n') advance(1);
        } else if (c == '\n' || c == ';') {
            tokens.push_back({Tok::end_stmt, std::string(1, c), 0.0, loc});
            ++i;
            if (c == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        } else if (is_ident_start(c)) {
            std::size_t j = i;
            while (j < src.size() && (is_ident_start(src[j]) || is_digit(src[j]))) ++j;
            tokens.push_back({Tok::ident, std::string(src.substr(i, j - i)), 0.0, loc});
            advance(j - i);
        } else if (is_digit(c) || (c == '.' && i + 1 < src.size() && is_digit(src[i + 1]))) {
            std::size_t j = i;
            while (j < src.size() && is_digit(src[j])) ++j;
            if (j < src.size() && src[j] == '.') {
                ++j;
                while (j < src.size() && is_digit(src[j])) ++j;
            }
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k >= src.size() || !is_digit(src[k])) {
                    throw ParseError({line, col + (k - i)}, "malformed exponent in number", {"digit"});
                }
                while (k < src.size() && is_digit(src[k])) ++k;
                j = k;
            }
            const std::string text(src.substr(i, j - i));
            double value = 0.0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
            if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
                throw ParseError(loc, "number " + text + " (not a finite double)", {"finite number"});
            }
            tokens.push_back({Tok::number, text, value, loc});
            advance(j - i);
        } else {
            Tok kind;
            switch (c) {
                case '+': kind = Tok::plus; break;
                case '-': kind = Tok::minus; break;
                case '*': kind = Tok::star; break;
                case '/': kind = Tok::slash; break;
                case '^': kind = Tok::caret; break;
                case '(': kind = Tok::lparen; break;
                case ')': kind = Tok::rparen; break;
                case ',': kind = Tok::comma; break;
                case '=': kind = Tok::equals; break;
                default: {
                    std::string shown;
                    if (static_cast<unsigned char>(c) >= 0x20 && static_cast<unsigned char>(c) < 0x7f) {
                        shown = "character '" + std::string(1, c) + "'";
                    } else {
                        std::ostringstream os;
                        os << "byte 0x" << std::hex << static_cast<int>(static_cast<unsigned char>(c));
                        shown = os.str();
                    }
                    throw ParseError(loc, shown, {"identifier", "number", "operator", "'#' comment"});
                }
            }
            tokens.push_back({kind, std::string(1, c), 0.0, loc});
            advance(1);
        }
    }
    tokens.push_back({Tok::eof, "", 0.0, {line, col}});
    return tokens;
}

/// Statement list as written, before semantic checks.
struct RawProgram {
    std::vector<std::pair<std::string, SourceLocation>> model_names;
    std::vector<StateDecl> states;
    std::vector<ParamDecl> params;
    std::vector<Equation> equations;
};

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    RawProgram parse_program() {
        RawProgram prog;
        while (peek().kind != Tok::eof) {
            if (peek().kind == Tok::end_stmt) {
                ++pos_;
                continue;
            }
            parse_statement(prog);
            if (peek().kind != Tok::end_stmt && peek().kind != Tok::eof) {
                fail(expected_after_statement_);
            }
        }
        return prog;
    }

    Expr parse_standalone_expression() {
        while (peek().kind == Tok::end_stmt) ++pos_;
        Expr e = parse_expr();
        while (peek().kind == Tok::end_stmt) ++pos_;
        if (peek().kind != Tok::eof) fail({"operator", "end of input"});
        return e;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }

    [[noreturn]] void fail(std::vector<std::string> expected) const {
        throw ParseError(peek().loc, describe(peek()), std::move(expected));
    }

    const Token& expect(Tok kind) {
        if (peek().kind != kind) fail({describe(kind)});
        return tokens_[pos_++];
    }

    double parse_signed_number() {
        double sign = 1.0;
        if (peek().kind == Tok::minus) {
            ++pos_;
            sign = -1.0;
        }
        if (peek().kind != Tok::number) fail({"number"});
        return sign * tokens_[pos_++].value;
    }

    void parse_statement(RawProgram& prog) {
        const Token& head = peek();
        if (head.kind != Tok::ident) fail({"'model'", "'state'", "'param'", "equation 'd<state>/dt = ...'"});
        if (head.text == "model") {
            ++pos_;
            const Token& name = expect(Tok::ident);
            std::string full = name.text;
            // Kebab-case names: ident ('-' ident)*
            while (peek().kind == Tok::minus) {
                ++pos_;
                full += "-" + expect(Tok::ident).text;
            }
            prog.model_names.emplace_back(full, name.loc);
            expected_after_statement_ = {"end of statement"};
            return;
        }
        if (head.text == "state") {
            ++pos_;
            const Token& name = expect(Tok::ident);
            expect(Tok::equals);
            const double value = parse_signed_number();
            prog.states.push_back({name.text, value, name.loc});
            expected_after_statement_ = {"end of statement"};
            return;
        }
        if (head.text == "param") {
            ++pos_;
            const Token& name = expect(Tok::ident);
            ParamDecl decl{name.text, std::nullopt, false, name.loc};
            if (peek().kind == Tok::equals) {
                ++pos_;
                decl.default_value = parse_signed_number();
            }
            if (peek().kind == Tok::ident && peek().text == "nonneg") {
                ++pos_;
                decl.nonneg = true;
                expected_after_statement_ = {"end of statement"};
            } else {
                expected_after_statement_ = decl.default_value
                                                ? std::vector<std::string>{"'nonneg'", "end of statement"}
                                                : std::vector<std::string>{"'='", "'nonneg'", "end of statement"};
            }
            prog.params.push_back(std::move(decl));
            return;
        }
        if (head.text.size() > 1 && head.text[0] == 'd' && tokens_[pos_ + 1].kind == Tok::slash) {
            const SourceLocation loc = head.loc;
            const std::string state = head.text.substr(1);
            pos_ += 2;
            const Token& dt = expect(Tok::ident);
            if (dt.text != "dt") {
                --pos_;
                fail({"'dt'"});
            }
            expect(Tok::equals);
            Expr rhs = parse_expr();
            prog.equations.push_back({state, std::move(rhs), loc});
            expected_after_statement_ = {"operator", "end of statement"};
            return;
        }
        fail({"'model'", "'state'", "'param'", "equation 'd<state>/dt = ...'"});
    }

    // expr := term (('+' | '-') term)*
    Expr parse_expr() {
        Expr lhs = parse_term();
        while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
            const Token& op = tokens_[pos_++];
            Expr rhs = parse_term();
            lhs = binary(op, std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    // term := unary (('*' | '/') unary)*
    Expr parse_term() {
        Expr lhs = parse_unary();
        while (peek().kind == Tok::star || peek().kind == Tok::slash) {
            const Token& op = tokens_[pos_++];
            Expr rhs = parse_unary();
            lhs = binary(op, std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    // unary := '-' unary | power
    Expr parse_unary() {
        if (peek().kind == Tok::minus) {
            const SourceLocation loc = tokens_[pos_++].loc;
            Expr e;
            e.kind = Expr::Kind::negate;
            e.loc = loc;
            e.args.push_back(parse_unary());
            return e;
        }
        return parse_power();
    }

    // power := primary ('^' unary)?     right-associative through unary
    Expr parse_power() {
        Expr base = parse_primary();
        if (peek().kind == Tok::caret) {
            const Token& op = tokens_[pos_++];
            Expr exponent = parse_unary();
            return binary(op, std::move(base), std::move(exponent));
        }
        return base;
    }

    Expr parse_primary() {
        const Token& tok = peek();
        if (tok.kind == Tok::number) {
            ++pos_;
            Expr e;
            e.kind = Expr::Kind::number;
            e.number = tok.value;
            e.loc = tok.loc;
            return e;
        }
        if (tok.kind == Tok::ident) {
            ++pos_;
            Expr e;
            e.name = tok.text;
            e.loc = tok.loc;
            if (peek().kind == Tok::lparen) {
                ++pos_;
                e.kind = Expr::Kind::call;
                if (peek().kind != Tok::rparen) {
                    e.args.push_back(parse_expr());
                    while (peek().kind == Tok::comma) {
                        ++pos_;
                        e.args.push_back(parse_expr());
                    }
                }
                if (peek().kind != Tok::rparen) fail({"','", "')'"});
                ++pos_;
            } else {
                e.kind = Expr::Kind::identifier;
            }
            return e;
        }
        if (tok.kind == Tok::lparen) {
            ++pos_;
            Expr inner = parse_expr();
            if (peek().kind != Tok::rparen) fail({"operator", "')'"});
            ++pos_;
            return inner;
        }
        fail({"number", "identifier", "'('", "'-'"});
    }

    static Expr binary(const Token& op, Expr lhs, Expr rhs) {
        Expr e;
        e.kind = Expr::Kind::binary;
        e.op = op.text[0];
        e.loc = op.loc;
        e.args.push_back(std::move(lhs));
        e.args.push_back(std::move(rhs));
        return e;
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    std::vector<std::string> expected_after_statement_ = {"end of statement"};
};

inline bool reserved(std::string_view name) {
    return name == kTimeSymbol || name == "model" || name == "state" || name == "param" || name == "nonneg" ||
           function_arity(name).has_value();
}

inline void check_expression(const Expr& e, const std::set<std::string, std::less<>>& declared,
                             std::vector<Diagnostic>& out) {
    switch (e.kind) {
        case Expr::Kind::identifier:
            if (e.name != kTimeSymbol && !declared.count(e.name)) {
                out.push_back({e.loc, "undeclared identifier '" + e.name + "'"});
            }
            break;
        case Expr::Kind::call: {
            auto arity = function_arity(e.name);
            if (!arity) {
                out.push_back({e.loc, "unknown function '" + e.name + "'"});
            } else if (*arity != e.args.size()) {
                out.push_back({e.loc, "function '" + e.name + "' takes " + std::to_string(*arity) + " argument(s), got " +
                                          std::to_string(e.args.size())});
            }
            break;
        }
        default: break;
    }
    for (const auto& child : e.args) check_expression(child, declared, out);
}

inline ModelDefinition validate_program(RawProgram prog) {
    std::vector<Diagnostic> diags;
    ModelDefinition def;
    if (!prog.model_names.empty()) def.name = prog.model_names.front().first;
    for (std::size_t i = 1; i < prog.model_names.size(); ++i) {
        diags.push_back({prog.model_names[i].second, "duplicate model declaration"});
    }

    std::set<std::string, std::less<>> declared;
    auto declare = [&](const std::string& name, const SourceLocation& loc, const char* what) {
        if (reserved(name)) {
            diags.push_back({loc, std::string(what) + " name '" + name + "' is reserved"});
            return false;
        }
        if (!declared.insert(name).second) {
            diags.push_back({loc, "duplicate declaration of '" + name + "'"});
            return false;
        }
        return true;
    };
    for (auto& s : prog.states) {
        if (declare(s.name, s.loc, "state")) {
            if (s.initial < 0.0) diags.push_back({s.loc, "initial value of state '" + s.name + "' is negative"});
            def.states.push_back(s);
        }
    }
    for (auto& p : prog.params) {
        if (declare(p.name, p.loc, "parameter")) {
            if (p.nonneg && p.default_value && *p.default_value < 0.0) {
                diags.push_back({p.loc, "default of nonneg parameter '" + p.name + "' is negative"});
            }
            def.params.push_back(p);
        }
    }

    std::map<std::string, std::size_t, std::less<>> state_slot;
    for (std::size_t i = 0; i < def.states.size(); ++i) state_slot[def.states[i].name] = i;
    std::vector<std::optional<Equation>> by_state(def.states.size());
    for (auto& eq : prog.equations) {
        check_expression(eq.rhs, declared, diags);
        auto it = state_slot.find(eq.state);
        if (it == state_slot.end()) {
            diags.push_back({eq.loc, "equation for undeclared state '" + eq.state + "'"});
            continue;
        }
        if (by_state[it->second]) {
            diags.push_back({eq.loc, "duplicate equation for " + eq.state});
            continue;
        }
        by_state[it->second] = std::move(eq);
    }
    for (std::size_t i = 0; i < def.states.size(); ++i) {
        if (!by_state[i]) {
            diags.push_back({def.states[i].loc, "missing equation for " + def.states[i].name});
        } else {
            def.equations.push_back(std::move(*by_state[i]));
        }
    }
    if (def.states.empty() && diags.empty()) diags.push_back({{1, 1}, "model declares no states"});
    if (!diags.empty()) throw SemanticError(std::move(diags));
    return def;
}

}  // namespace detail

/// Parses and validates a model definition. Syntax errors raise ParseError
/// (with location and expected tokens); semantic problems raise one
/// SemanticError listing every offense.
inline ModelDefinition parse_model(std::string_view source) {
    detail::Parser parser(detail::lex(source));
    return detail::validate_program(parser.parse_program());
}

/// Parses a single expression (no statement syntax).
inline Expr parse_expression(std::string_view source) {
    detail::Parser parser(detail::lex(source));
    return parser.parse_standalone_expression();
}

namespace detail {

inline double checked_pow(double base, double exponent, const SourceLocation& loc) {
    if (base < 0.0 && exponent != std::trunc(exponent)) {
        throw EvaluationError(loc, "negative base raised to a non-integer power");
    }
    if (base == 0.0 && exponent < 0.0) throw EvaluationError(loc, "zero raised to a negative power");
    return std::pow(base, exponent);
}

inline double checked_div(double num, double den, const SourceLocation& loc) {
    if (den == 0.0) throw EvaluationError(loc, "division by zero");
    return num / den;
}

inline double apply_binary(char op, double l, double r, const SourceLocation& loc) {
    switch (op) {
        case '+': return l + r;
        case '-': return l - r;
        case '*': return l * r;
        case '/': return checked_div(l, r, loc);
        case '^': return checked_pow(l, r, loc);
    }
    throw EvaluationError(loc, std::string("unknown operator '") + op + "'");
}

inline double apply_call(std::string_view fn, std::span<const double> args, const SourceLocation& loc) {
    if (fn == "exp") return std::exp(args[0]);
    if (fn == "ln") {
        if (!(args[0] > 0.0)) throw EvaluationError(loc, "ln of a non-positive value");
        return std::log(args[0]);
    }
    if (fn == "sqrt") {
        if (args[0] < 0.0) throw EvaluationError(loc, "sqrt of a negative value");
        return std::sqrt(args[0]);
    }
    if (fn == "tanh") return std::tanh(args[0]);
    if (fn == "min") return std::min(args[0], args[1]);
    if (fn == "max") return std::max(args[0], args[1]);
    throw EvaluationError(loc, "unknown function '" + std::string(fn) + "'");
}

}  // namespace detail

/// Tree-walking evaluation in IEEE double precision.
inline double eval_expr(const Expr& e, const std::map<std::string, double, std::less<>>& bindings) {
    switch (e.kind) {
        case Expr::Kind::number: return e.number;
        case Expr::Kind::identifier: {
            auto it = bindings.find(e.name);
            if (it == bindings.end()) throw BindingError(e.loc, e.name);
            return it->second;
        }
        case Expr::Kind::negate: return -eval_expr(e.args[0], bindings);
        case Expr::Kind::binary:
            return detail::apply_binary(e.op, eval_expr(e.args[0], bindings), eval_expr(e.args[1], bindings), e.loc);
        case Expr::Kind::call: {
            auto arity = function_arity(e.name);
            if (!arity || *arity != e.args.size()) {
                throw EvaluationError(e.loc, "bad call to '" + e.name + "'");
            }
            std::vector<double> args;
            for (const auto& a : e.args) args.push_back(eval_expr(a, bindings));
            return detail::apply_call(e.name, args, e.loc);
        }
    }
    throw EvaluationError(e.loc, "malformed expression");
}

inline bool references_time(const Expr& e) {
    if (e.kind == Expr::Kind::identifier && e.name == kTimeSymbol) return true;
    for (const auto& a : e.args) {
        if (references_time(a)) return true;
    }
    return false;
}

/// Source text that re-parses to a structurally identical expression.
inline std::string print_expr(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::number: {
            char buf[32];
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, e.number);
            (void)ec;
            return std::string(buf, ptr);
        }
        case Expr::Kind::identifier: return e.name;
        case Expr::Kind::negate: return "(-" + print_expr(e.args[0]) + ")";
        case Expr::Kind::binary:
            return "(" + print_expr(e.args[0]) + " " + std::string(1, e.op) + " " + print_expr(e.args[1]) + ")";
        case Expr::Kind::call: {
            std::string out = e.name + "(";
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (i > 0) out += ", ";
                out += print_expr(e.args[i]);
            }
            return out + ")";
        }
    }
    return "";
}

inline std::string print_model(const ModelDefinition& def) {
    auto number = [](double v) {
        char buf[32];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        (void)ec;
        return std::string(buf, ptr);
    };
    std::string out = "model " + def.name + "\n";
    for (const auto& s : def.states) out += "state " + s.name + " = " + number(s.initial) + "\n";
    for (const auto& p : def.params) {
        out += "param " + p.name;
        if (p.default_value) out += " = " + number(*p.default_value);
        if (p.nonneg) out += " nonneg";
        out += "\n";
    }
    for (const auto& eq : def.equations) out += "d" + eq.state + "/dt = " + print_expr(eq.rhs) + "\n";
    return out;
}

namespace detail {

/// Postfix program over slots: states, then params, then t.
struct Program {
    enum class Op { constant, load, negate, binary, call };
    struct Instr {
        Op op;
        double value = 0.0;
        std::size_t slot = 0;
        char bin = 0;
        std::string fn;
        SourceLocation loc;
    };
    std::vector<Instr> code;
    std::size_t max_depth = 0;
};

inline void emit(const Expr& e, const std::map<std::string, std::size_t, std::less<>>& slots, Program& prog,
                 std::size_t depth) {
    using Op = Program::Op;
    switch (e.kind) {
        case Expr::Kind::number:
            prog.code.push_back({Op::constant, e.number, 0, 0, {}, e.loc});
            ++depth;
            break;
        case Expr::Kind::identifier:
            prog.code.push_back({Op::load, 0.0, slots.at(e.name), 0, {}, e.loc});
            ++depth;
            break;
        case Expr::Kind::negate:
            emit(e.args[0], slots, prog, depth);
            prog.code.push_back({Op::negate, 0.0, 0, 0, {}, e.loc});
            ++depth;
            break;
        case Expr::Kind::binary:
            emit(e.args[0], slots, prog, depth);
            emit(e.args[1], slots, prog, depth + 1);
            prog.code.push_back({Op::binary, 0.0, 0, e.op, {}, e.loc});
            depth += 2;
            break;
        case Expr::Kind::call:
            for (std::size_t i = 0; i < e.args.size(); ++i) emit(e.args[i], slots, prog, depth + i);
            prog.code.push_back({Op::call, 0.0, e.args.size(), 0, e.name, e.loc});
            depth += e.args.size() + 1;
            break;
    }
    prog.max_depth = std::max(prog.max_depth, depth);
}

inline double run(const Program& prog, std::span<const double> slots, std::vector<double>& stack) {
    using Op = Program::Op;
    stack.clear();
    for (const auto& ins : prog.code) {
        switch (ins.op) {
            case Op::constant: stack.push_back(ins.value); break;
            case Op::load: stack.push_back(slots[ins.slot]); break;
            case Op::negate: stack.back() = -stack.back(); break;
            case Op::binary: {
                const double r = stack.back();
                stack.pop_back();
                stack.back() = apply_binary(ins.bin, stack.back(), r, ins.loc);
                break;
            }
            case Op::call: {
                const std::size_t n = ins.slot;
                const double result =
                    apply_call(ins.fn, std::span<const double>(stack.data() + stack.size() - n, n), ins.loc);
                stack.resize(stack.size() - n);
                stack.push_back(result);
                break;
            }
        }
    }
    return stack.back();
}

}  // namespace detail

/// A ModelSystem whose rhs evaluates the definition's equations.
inline ModelSystem compile_model(const ModelDefinition& def) {
    std::map<std::string, std::size_t, std::less<>> slots;
    std::vector<std::string> state_names;
    for (const auto& s : def.states) {
        slots[s.name] = state_names.size();
        state_names.push_back(s.name);
    }
    std::vector<ParamSpec> schema;
    for (const auto& p : def.params) {
        slots[p.name] = state_names.size() + schema.size();
        schema.push_back({p.name, p.nonneg ? Constraint::nonnegative : Constraint::any, p.default_value, p.name});
    }
    const std::size_t time_slot = state_names.size() + schema.size();
    slots[std::string(kTimeSymbol)] = time_slot;

    auto programs = std::make_shared<std::vector<detail::Program>>();
    bool time_dependent = false;
    std::string reference;
    for (const auto& eq : def.equations) {
        detail::Program prog;
        detail::emit(eq.rhs, slots, prog, 0);
        programs->push_back(std::move(prog));
        time_dependent = time_dependent || references_time(eq.rhs);
        if (!reference.empty()) reference += "; ";
        reference += "d" + eq.state + "/dt = " + print_expr(eq.rhs);
    }

    const std::size_t n_states = state_names.size();
    const std::size_t n_params = schema.size();
    RhsFunction rhs = [programs, n_states, n_params, time_slot](double t, std::span<const double> state,
                                                               std::span<const double> params,
                                                               std::span<double> out) {
        std::vector<double> slots_buf(time_slot + 1);
        std::copy(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(n_states), slots_buf.begin());
        std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(n_params),
                  slots_buf.begin() + static_cast<std::ptrdiff_t>(n_states));
        slots_buf[time_slot] = t;
        std::vector<double> stack;
        for (std::size_t i = 0; i < programs->size(); ++i) out[i] = detail::run((*programs)[i], slots_buf, stack);
    };
    return ModelSystem(def.name, std::move(state_names), std::move(schema), std::move(rhs), time_dependent,
                       std::move(reference));
}

/// Initial values declared by `state` statements.
inline StateVector initial_state(const ModelDefinition& def) {
    std::vector<std::string> names;
    std::vector<double> values;
    for (const auto& s : def.states) {
        names.push_back(s.name);
        values.push_back(s.initial);
    }
    return StateVector(std::move(names), std::move(values));
}

/// Parameter defaults declared in the definition.
inline ParameterSet default_parameters(const ModelDefinition& def) {
    ParameterSet::Map m;
    for (const auto& p : def.params) {
        if (p.default_value) m[p.name] = *p.default_value;
    }
    return ParameterSet(std::move(m));
}

}  // namespace qss::dsl
