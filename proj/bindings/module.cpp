#include <pybind11/pybind11.h>
PYBIND11_MODULE(_lplab, m) { m.doc() = "stub"; }
