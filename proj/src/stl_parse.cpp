#include <cctype>
#include <cmath>
#include <cstdio>

#include "svsmc/stl.hpp"

namespace svsmc {

namespace {

struct Token {
    enum class Kind {
        Ident, Number, True, False,
        Not, And, Or, UntilOp, EventuallyOp, GloballyOp, DeltaOp,
        LParen, RParen, LBracket, RBracket, Comma, Inf,
        Plus, Minus, Star, Lt, Le, Gt, Ge, EqEq, End
    };
    Kind kind;
    std::string text;
    double number = 0.0;
    size_t pos = 0;
};

class Lexer {
public:
    explicit Lexer(const std::string& s) : s_(s) { tokenize(); }
    const std::vector<Token>& tokens() const { return toks_; }

private:
    void tokenize() {
        size_t i = 0;
        const size_t n = s_.size();
        while (i < n) {
            if (std::isspace(static_cast<unsigned char>(s_[i]))) {
                ++i;
                continue;
            }
            size_t start = i;
            char c = s_[i];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                size_t j = i;
                while (j < n && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_'))
                    ++j;
                std::string word = s_.substr(i, j - i);
                i = j;
                // U/F/G followed by '[' are temporal operators; D followed by
                // '(' is the difference operator. Otherwise identifiers.
                size_t k = i;
                while (k < n && std::isspace(static_cast<unsigned char>(s_[k]))) ++k;
                if (word == "true") push(Token::Kind::True, word, start);
                else if (word == "false") push(Token::Kind::False, word, start);
                else if (word == "inf") push(Token::Kind::Inf, word, start);
                else if (word == "U" && k < n && s_[k] == '[') push(Token::Kind::UntilOp, word, start);
                else if (word == "F" && k < n && s_[k] == '[') push(Token::Kind::EventuallyOp, word, start);
                else if (word == "G" && k < n && s_[k] == '[') push(Token::Kind::GloballyOp, word, start);
                else if (word == "D" && k < n && s_[k] == '(') push(Token::Kind::DeltaOp, word, start);
                else push(Token::Kind::Ident, word, start);
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(s_[i + 1])))) {
                size_t j = i;
                while (j < n && (std::isdigit(static_cast<unsigned char>(s_[j])) || s_[j] == '.' ||
                                 s_[j] == 'e' || s_[j] == 'E' ||
                                 ((s_[j] == '+' || s_[j] == '-') && j > i &&
                                  (s_[j - 1] == 'e' || s_[j - 1] == 'E'))))
                    ++j;
                Token t;
                t.kind = Token::Kind::Number;
                t.text = s_.substr(i, j - i);
                t.pos = start;
                try {
                    t.number = std::stod(t.text);
                } catch (...) {
                    throw ParseError("malformed number '" + t.text + "'", start);
                }
                toks_.push_back(t);
                i = j;
                continue;
            }
            switch (c) {
                case '!': push(Token::Kind::Not, "!", start); ++i; break;
                case '&': push(Token::Kind::And, "&", start); ++i; if (i < n && s_[i] == '&') ++i; break;
                case '|': push(Token::Kind::Or, "|", start); ++i; if (i < n && s_[i] == '|') ++i; break;
                case '(': push(Token::Kind::LParen, "(", start); ++i; break;
                case ')': push(Token::Kind::RParen, ")", start); ++i; break;
                case '[': push(Token::Kind::LBracket, "[", start); ++i; break;
                case ']': push(Token::Kind::RBracket, "]", start); ++i; break;
                case ',': push(Token::Kind::Comma, ",", start); ++i; break;
                case '+': push(Token::Kind::Plus, "+", start); ++i; break;
                case '-': push(Token::Kind::Minus, "-", start); ++i; break;
                case '*': push(Token::Kind::Star, "*", start); ++i; break;
                case '<':
                    ++i;
                    if (i < n && s_[i] == '=') { push(Token::Kind::Le, "<=", start); ++i; }
                    else push(Token::Kind::Lt, "<", start);
                    break;
                case '>':
                    ++i;
                    if (i < n && s_[i] == '=') { push(Token::Kind::Ge, ">=", start); ++i; }
                    else push(Token::Kind::Gt, ">", start);
                    break;
                case '=':
                    if (i + 1 < n && s_[i + 1] == '=') { push(Token::Kind::EqEq, "==", start); i += 2; }
                    else throw ParseError("expected '==' ", start);
                    break;
                default:
                    throw ParseError(std::string("unexpected character '") + c + "'", start);
            }
        }
        push(Token::Kind::End, "", n);
    }
    void push(Token::Kind k, std::string text, size_t pos) {
        Token t;
        t.kind = k;
        t.text = std::move(text);
        t.pos = pos;
        toks_.push_back(std::move(t));
    }
    const std::string& s_;
    std::vector<Token> toks_;
};

FormulaPtr make_true() {
    auto f = std::make_shared<StlFormula>();
    f->kind = StlFormula::Kind::True;
    return f;
}
FormulaPtr make_not(FormulaPtr a) {
    auto f = std::make_shared<StlFormula>();
    f->kind = StlFormula::Kind::Not;
    f->a = std::move(a);
    return f;
}
FormulaPtr make_and(FormulaPtr a, FormulaPtr b) {
    auto f = std::make_shared<StlFormula>();
    f->kind = StlFormula::Kind::And;
    f->a = std::move(a);
    f->b = std::move(b);
    return f;
}
FormulaPtr make_until(FormulaPtr a, FormulaPtr b, double lo, double hi) {
    auto f = std::make_shared<StlFormula>();
    f->kind = StlFormula::Kind::Until;
    f->a = std::move(a);
    f->b = std::move(b);
    f->t_lo = lo;
    f->t_hi = hi;
    return f;
}

class Parser {
public:
    explicit Parser(const std::vector<Token>& toks) : toks_(toks) {}

    FormulaPtr parse() {
        FormulaPtr f = parse_until();
        expect(Token::Kind::End, "unexpected trailing input");
        return f;
    }

private:
    const Token& cur() const { return toks_[i_]; }
    void advance() { ++i_; }
    bool accept(Token::Kind k) {
        if (cur().kind == k) {
            advance();
            return true;
        }
        return false;
    }
    void expect(Token::Kind k, const std::string& msg) {
        if (!accept(k)) throw ParseError(msg, cur().pos);
    }

    std::pair<double, double> parse_window() {
        expect(Token::Kind::LBracket, "expected '[' after temporal operator");
        if (cur().kind != Token::Kind::Number)
            throw ParseError("expected interval lower bound", cur().pos);
        double lo = cur().number;
        advance();
        expect(Token::Kind::Comma, "expected ',' in temporal interval");
        double hi;
        if (accept(Token::Kind::Inf)) {
            hi = std::numeric_limits<double>::infinity();
        } else if (cur().kind == Token::Kind::Number) {
            hi = cur().number;
            advance();
        } else {
            throw ParseError("expected interval upper bound", cur().pos);
        }
        size_t pos = cur().pos;
        expect(Token::Kind::RBracket, "expected ']' closing temporal interval");
        if (!(lo >= 0.0) || !(lo < hi)) throw ParseError("temporal interval must satisfy 0 <= a < b", pos);
        return {lo, hi};
    }

    FormulaPtr parse_until() {
        FormulaPtr lhs = parse_or();
        while (cur().kind == Token::Kind::UntilOp) {
            advance();
            auto [lo, hi] = parse_window();
            FormulaPtr rhs = parse_or();
            lhs = make_until(std::move(lhs), std::move(rhs), lo, hi);
        }
        return lhs;
    }

    FormulaPtr parse_or() {
        FormulaPtr lhs = parse_and();
        while (accept(Token::Kind::Or)) {
            FormulaPtr rhs = parse_and();
            lhs = make_not(make_and(make_not(std::move(lhs)), make_not(std::move(rhs))));
        }
        return lhs;
    }

    FormulaPtr parse_and() {
        FormulaPtr lhs = parse_not();
        while (accept(Token::Kind::And)) {
            FormulaPtr rhs = parse_not();
            lhs = make_and(std::move(lhs), std::move(rhs));
        }
        return lhs;
    }

    FormulaPtr parse_not() {
        if (accept(Token::Kind::Not)) return make_not(parse_not());
        if (cur().kind == Token::Kind::EventuallyOp) {
            advance();
            auto [lo, hi] = parse_window();
            return make_until(make_true(), parse_not(), lo, hi);
        }
        if (cur().kind == Token::Kind::GloballyOp) {
            advance();
            auto [lo, hi] = parse_window();
            return make_not(make_until(make_true(), make_not(parse_not()), lo, hi));
        }
        return parse_primary();
    }

    FormulaPtr parse_primary() {
        if (accept(Token::Kind::True)) return make_true();
        if (accept(Token::Kind::False)) return make_not(make_true());
        // An atom and a parenthesized formula can both start with '('; try
        // the atom first and fall back on failure.
        size_t save = i_;
        try {
            return parse_atom();
        } catch (const ParseError&) {
            i_ = save;
        }
        if (accept(Token::Kind::LParen)) {
            FormulaPtr f = parse_until();
            expect(Token::Kind::RParen, "expected ')'");
            return f;
        }
        throw ParseError("expected formula", cur().pos);
    }

    FormulaPtr parse_atom() {
        auto lhs = parse_expr();
        CmpOp op;
        switch (cur().kind) {
            case Token::Kind::Lt: op = CmpOp::Lt; break;
            case Token::Kind::Le: op = CmpOp::Le; break;
            case Token::Kind::Gt: op = CmpOp::Gt; break;
            case Token::Kind::Ge: op = CmpOp::Ge; break;
            case Token::Kind::EqEq: op = CmpOp::Eq; break;
            default: throw ParseError("expected comparison operator", cur().pos);
        }
        advance();
        auto rhs = parse_expr();
        auto f = std::make_shared<StlFormula>();
        f->kind = StlFormula::Kind::Atom;
        f->lhs = std::move(lhs);
        f->rhs = std::move(rhs);
        f->cmp = op;
        return f;
    }

    std::shared_ptr<Expr> parse_expr() {
        auto lhs = parse_term();
        for (;;) {
            Expr::Kind k;
            if (cur().kind == Token::Kind::Plus) k = Expr::Kind::Add;
            else if (cur().kind == Token::Kind::Minus) k = Expr::Kind::Sub;
            else break;
            advance();
            auto rhs = parse_term();
            auto e = std::make_shared<Expr>();
            e->kind = k;
            e->lhs = std::move(lhs);
            e->rhs = std::move(rhs);
            lhs = std::move(e);
        }
        return lhs;
    }

    std::shared_ptr<Expr> parse_term() {
        auto lhs = parse_factor();
        while (cur().kind == Token::Kind::Star) {
            advance();
            auto rhs = parse_factor();
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Kind::Mul;
            e->lhs = std::move(lhs);
            e->rhs = std::move(rhs);
            lhs = std::move(e);
        }
        return lhs;
    }

    std::shared_ptr<Expr> parse_factor() {
        auto e = std::make_shared<Expr>();
        if (cur().kind == Token::Kind::Number) {
            e->kind = Expr::Kind::Constant;
            e->value = cur().number;
            advance();
            return e;
        }
        if (cur().kind == Token::Kind::Minus) {
            advance();
            auto inner = parse_factor();
            auto zero = std::make_shared<Expr>();
            zero->kind = Expr::Kind::Constant;
            zero->value = 0.0;
            e->kind = Expr::Kind::Sub;
            e->lhs = std::move(zero);
            e->rhs = std::move(inner);
            return e;
        }
        if (cur().kind == Token::Kind::DeltaOp) {
            advance();
            expect(Token::Kind::LParen, "expected '(' after D");
            if (cur().kind != Token::Kind::Ident)
                throw ParseError("expected species name in D(...)", cur().pos);
            e->kind = Expr::Kind::Delta;
            e->name = cur().text;
            advance();
            expect(Token::Kind::RParen, "expected ')' closing D(...)");
            return e;
        }
        if (cur().kind == Token::Kind::Ident) {
            e->kind = Expr::Kind::Species;
            e->name = cur().text;
            advance();
            return e;
        }
        if (accept(Token::Kind::LParen)) {
            auto inner = parse_expr();
            expect(Token::Kind::RParen, "expected ')' in expression");
            return inner;
        }
        throw ParseError("expected expression", cur().pos);
    }

    const std::vector<Token>& toks_;
    size_t i_ = 0;
};

void print_expr(const Expr& e, std::string& out) {
    char buf[40];
    switch (e.kind) {
        case Expr::Kind::Constant:
            std::snprintf(buf, sizeof buf, "%.17g", e.value);
            out += buf;
            break;
        case Expr::Kind::Species: out += e.name; break;
        case Expr::Kind::Delta:
            out += "D(";
            out += e.name;
            out += ")";
            break;
        case Expr::Kind::Add:
        case Expr::Kind::Sub:
        case Expr::Kind::Mul:
            out += "(";
            print_expr(*e.lhs, out);
            out += e.kind == Expr::Kind::Add ? " + " : e.kind == Expr::Kind::Sub ? " - " : " * ";
            print_expr(*e.rhs, out);
            out += ")";
            break;
    }
}

void print_formula(const StlFormula& f, std::string& out) {
    char buf[40];
    switch (f.kind) {
        case StlFormula::Kind::True: out += "true"; break;
        case StlFormula::Kind::Atom:
            out += "(";
            print_expr(*f.lhs, out);
            switch (f.cmp) {
                case CmpOp::Lt: out += " < "; break;
                case CmpOp::Le: out += " <= "; break;
                case CmpOp::Gt: out += " > "; break;
                case CmpOp::Ge: out += " >= "; break;
                case CmpOp::Eq: out += " == "; break;
            }
            print_expr(*f.rhs, out);
            out += ")";
            break;
        case StlFormula::Kind::Not:
            out += "!";
            print_formula(*f.a, out);
            break;
        case StlFormula::Kind::And:
            out += "(";
            print_formula(*f.a, out);
            out += " & ";
            print_formula(*f.b, out);
            out += ")";
            break;
        case StlFormula::Kind::Until:
            out += "(";
            print_formula(*f.a, out);
            out += " U[";
            std::snprintf(buf, sizeof buf, "%.17g", f.t_lo);
            out += buf;
            out += ",";
            if (std::isinf(f.t_hi)) {
                out += "inf";
            } else {
                std::snprintf(buf, sizeof buf, "%.17g", f.t_hi);
                out += buf;
            }
            out += "] ";
            print_formula(*f.b, out);
            out += ")";
            break;
    }
}

bool expr_equal(const Expr& a, const Expr& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Expr::Kind::Constant: return a.value == b.value;
        case Expr::Kind::Species:
        case Expr::Kind::Delta: return a.name == b.name;
        default: return expr_equal(*a.lhs, *b.lhs) && expr_equal(*a.rhs, *b.rhs);
    }
}

}  // namespace

FormulaPtr parse_stl(const std::string& text) {
    Lexer lex(text);
    Parser p(lex.tokens());
    return p.parse();
}

std::string pretty_print(const StlFormula& f) {
    std::string out;
    print_formula(f, out);
    return out;
}

bool formula_equal(const StlFormula& a, const StlFormula& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case StlFormula::Kind::True: return true;
        case StlFormula::Kind::Atom:
            return a.cmp == b.cmp && expr_equal(*a.lhs, *b.lhs) && expr_equal(*a.rhs, *b.rhs);
        case StlFormula::Kind::Not: return formula_equal(*a.a, *b.a);
        case StlFormula::Kind::And:
            return formula_equal(*a.a, *b.a) && formula_equal(*a.b, *b.b);
        case StlFormula::Kind::Until:
            return a.t_lo == b.t_lo && a.t_hi == b.t_hi && formula_equal(*a.a, *b.a) &&
                   formula_equal(*a.b, *b.b);
    }
    return false;
}

double temporal_depth(const StlFormula& f) {
    switch (f.kind) {
        case StlFormula::Kind::True:
        case StlFormula::Kind::Atom: return 0.0;
        case StlFormula::Kind::Not: return temporal_depth(*f.a);
        case StlFormula::Kind::And:
            return std::max(temporal_depth(*f.a), temporal_depth(*f.b));
        case StlFormula::Kind::Until: {
            double reach = std::isinf(f.t_hi) ? f.t_lo : f.t_hi;
            return reach + std::max(temporal_depth(*f.a), temporal_depth(*f.b));
        }
    }
    return 0.0;
}

}  // namespace svsmc
