import os
import platform

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup


def _host_has_avx2_fma():
    # The extension is compiled for the machine that builds it;
    # CRUOT_PORTABLE=1 skips the ISA extensions for redistributable builds.
    if os.environ.get("CRUOT_PORTABLE") or platform.machine() not in ("x86_64", "AMD64"):
        return False
    try:
        with open("/proc/cpuinfo") as fh:
            flags = next((line for line in fh if line.startswith("flags")), "").split()
    except OSError:
        return False
    return "avx2" in flags and "fma" in flags


openmp = [] if os.environ.get("CRUOT_NO_OPENMP") else ["-fopenmp"]
# exp is evaluated by an inline polynomial that only vectorizes without trapping/errno semantics
cflags = ["-O3", "-fno-trapping-math", "-fno-math-errno"] + openmp
if _host_has_avx2_fma():
    cflags += ["-mavx2", "-mfma"]

extensions = [
    Extension(
        "cruot._ckernels",
        ["src/cruot/_ckernels.pyx"],
        include_dirs=[np.get_include(), "src/cruot"],
        depends=["src/cruot/_vexp.h"],
        extra_compile_args=cflags,
        extra_link_args=openmp,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
