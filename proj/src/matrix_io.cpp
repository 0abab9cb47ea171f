#include "wrflow/matrix_io.hpp"

#include <string>

namespace wrflow::io {

namespace {

Json complex_to_json(const Complex& z)
{
    return Json::array({z.real(), z.imag()});
}

Complex complex_from_json(const Json& pair)
{
    if (pair.is_number()) return {pair.get<double>(), 0.0};
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
        throw Error(ErrorKind::ParseError, "complex entry must be [re, im], got " + pair.dump());
    return {pair[0].get<double>(), pair[1].get<double>()};
}

} // namespace

Json matrix_to_json(const Matrix& m)
{
    Json entries = Json::array();
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) entries.push_back(complex_to_json(m(i, j)));
    Json doc;
    doc["dim"] = m.rows();
    doc["entries"] = std::move(entries);
    return doc;
}

Matrix matrix_from_json(const Json& doc)
{
    if (!doc.is_object() || !doc.contains("dim") || !doc.contains("entries"))
        throw Error(ErrorKind::ParseError, "matrix document needs 'dim' and 'entries'");
    const auto dim = doc.at("dim").get<long long>();
    const Json& entries = doc.at("entries");
    if (dim <= 0 || !entries.is_array() || static_cast<long long>(entries.size()) != dim * dim)
        throw Error(ErrorKind::ParseError,
                    "matrix document with dim " + std::to_string(dim) + " needs dim*dim entries");
    Matrix m(dim, dim);
    std::size_t k = 0;
    for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < dim; ++j) m(i, j) = complex_from_json(entries[k++]);
    return m;
}

Json vector_to_json(const Vector& v)
{
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
    return out;
}

Vector vector_from_json(const Json& doc)
{
    if (!doc.is_array())
        throw Error(ErrorKind::ParseError, "vector must be a list of [re, im] pairs");
    Vector v(static_cast<Index>(doc.size()));
    for (std::size_t i = 0; i < doc.size(); ++i) v(static_cast<Index>(i)) = complex_from_json(doc[i]);
    return v;
}

} // namespace wrflow::io
