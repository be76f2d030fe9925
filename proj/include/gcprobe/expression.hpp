#pragma once

// Scalar expressions over chart coordinates of a product model.
//
//   variables   p1..p2M, z1..zN, zbar1..zbarN, the constant i
//   functions   conj(e), re(e), im(e), abs(e)
//   operators   + - * ^ (non-negative integer exponent), / (constant divisor)
//
// Names that are not variables or functions are looked up in an optional
// environment of previously defined expressions, which are spliced in as
// subtrees. Trees without abs carry exact derivatives in p, z and zbar,
// treated as independent variables.

#include <map>
#include <memory>
#include <string>

#include "gcprobe/field_calculus.hpp"

namespace gcprobe {

class ParseError : public InputError {
public:
    ParseError(const std::string& message, std::size_t column);
    std::size_t column() const { return column_; }

private:
    std::size_t column_;
};

struct Jet {
    Complex value;
    ComplexVector d_p;     // d/dp_l, length 2M
    ComplexVector d_z;     // d/dz_j, length N
    ComplexVector d_zbar;  // d/dzbar_j, length N
};

class Expression {
public:
    struct Node;

    static Expression parse(const std::string& text, const std::map<std::string, Expression>& env = {});

    const std::string& text() const { return text_; }
    bool polynomial() const;
    /// Largest p and z indices used (1-based, 0 if none).
    int max_p_index() const;
    int max_z_index() const;
    /// Throws InputError if the expression uses coordinates the chart lacks.
    void check_chart(const ModelChart& chart) const;

    Complex eval(const RealVector& x, const ModelChart& chart) const;
    /// Throws InputError when the tree contains abs.
    Jet jet(const RealVector& x, const ModelChart& chart) const;

    ComplexField field(const ModelChart& chart) const;

    const std::shared_ptr<const Node>& root() const { return root_; }

private:
    Expression(std::string text, std::shared_ptr<const Node> root);

    std::string text_;
    std::shared_ptr<const Node> root_;
};

/// Chart point with p and z filled in; z_j given as complex numbers.
RealVector chart_point(const ModelChart& chart, const RealVector& p, const ComplexVector& z);

}  // namespace gcprobe
