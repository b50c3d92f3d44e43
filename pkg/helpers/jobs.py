# Copyright 2022 D-Wave Systems Inc.
#
#    Licensed under the Apache License, Version 2.0 (the "License");
#    you may not use this file except in compliance with the License.
#    You may obtain a copy of the License at
#
#        http://www.apache.org/licenses/LICENSE-2.0
#
#    Unless required by applicable law or agreed to in writing, software
#    distributed under the License is distributed on an "AS IS" BASIS,
#    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#    See the License for the specific language governing permissions and
#    limitations under the License.
import hashlib
import time

from joblib import Parallel, delayed

__all__ = ["job_exit", "derive_seed", "run_jobs", "elapsed",]

job_exit = {"COMPLETED": 0,
            "FAILED": 1,
            "USAGE": 2, }

def derive_seed(seed, *keys):
    """Stable 64-bit seed for a subsystem, keyed by ints or strings."""

    text = ":".join(str(part) for part in (seed, *keys))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")

def run_jobs(function, arguments, n_jobs=1):
    """Apply ``function`` to each argument tuple; results keep input order."""

    if n_jobs == 1 or len(arguments) < 2:
        return [function(*args) for args in arguments]
    return Parallel(n_jobs=n_jobs)(delayed(function)(*args) for args in arguments)

def elapsed(ref_time):
    """Return elapsed time in seconds."""

    return round(time.perf_counter() - ref_time, 2)
