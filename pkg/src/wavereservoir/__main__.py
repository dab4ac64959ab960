import os
import sys


def _apply_thread_cap(argv):
    # must run before numpy is imported for the cap to reach the BLAS pool
    for i, arg in enumerate(argv):
        value = None
        if arg == "--threads" and i + 1 < len(argv):
            value = argv[i + 1]
        elif arg.startswith("--threads="):
            value = arg.split("=", 1)[1]
        if value is not None and value.isdigit():
            for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
                os.environ[var] = value


_apply_thread_cap(sys.argv[1:])

from .cli import main  # noqa: E402

sys.exit(main())
