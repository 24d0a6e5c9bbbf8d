"""Smoke test for the pqevot extension module.

Build first:
    cargo build --release -p evot-py --features extension-module
then run:
    python3 python/smoke_test.py
An installed `pqevot` (e.g. from `maturin develop` in crates/py) is used if present.
"""

import importlib.util
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import pqevot
        return pqevot
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libpqevot.so"
        if lib.exists():
            break
    else:
        sys.exit("libpqevot.so not found; build crates/py with --features extension-module")
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "pqevot.so")
    spec = importlib.util.spec_from_file_location("pqevot", tmp / "pqevot.so")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def peasant(a, b):
    p = 0
    while b:
        if b & 1:
            p ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11B
        b >>= 1
    return p


def main():
    ev = load()

    for a in range(0, 256, 7):
        for b in range(256):
            assert ev.gf_mul(a, b) == peasant(a, b), (a, b)

    sk = ev.SigningKeyPair(7, "tiny")
    sig = sk.sign(b"ballot", seed=3)
    assert isinstance(sig, bytes)
    assert sk.verify(b"ballot", sig)
    assert ev.verify(sk.public_key, b"ballot", sig)
    assert not sk.verify(b"ballot!", sig)
    bad = bytearray(sig)
    bad[-1] ^= 1
    assert not sk.verify(b"ballot", bytes(bad))
    assert ev.SigningKeyPair.from_secret(sk.secret_key).public_key == sk.public_key

    ek = ev.EncryptionKeyPair(9, "reference")
    ct = ek.encrypt(b"candidate Alder", seed=1)
    assert ek.decrypt(ct) == b"candidate Alder"
    bad = bytearray(ct)
    bad[len(bad) // 2] ^= 0x40
    try:
        ek.decrypt(bytes(bad))
        raise AssertionError("tampered ciphertext decrypted")
    except ValueError:
        pass

    r = bytes(range(32))
    c = ev.commit(b"Alder", r)
    assert ev.open_commitment(b"Alder", c, r)
    assert not ev.open_commitment(b"Birch", c, r)

    honest = ev.run_scenario((ROOT / "scenarios" / "honest-10.scn").read_text())
    assert honest.passed, honest.failures
    assert honest.published == [("Alder", 6), ("Birch", 4)]
    assert "L = 2" in honest.op_counts()
    assert "vote" in honest.sizes()
    verdict, seq, _ = ev.audit(honest.board, honest.params)
    assert (verdict, seq) == ("consistent", None)

    inflated = ev.run_scenario((ROOT / "scenarios" / "cc-inflate.scn").read_text())
    assert inflated.passed
    verdict, seq, detail = ev.audit(inflated.board, inflated.params)
    assert verdict == "discrepancy" and seq is not None, detail

    try:
        ev.run_scenario("election x\ncandidates A\n")
        raise AssertionError("bad scenario accepted")
    except ValueError:
        pass

    print("pqevot smoke test: ok", honest)


if __name__ == "__main__":
    main()
