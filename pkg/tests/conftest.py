from pathlib import Path

import pytest

from sessmon.parser import parse_process, parse_type
from sessmon.synthesis import synthesize

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def s_auth():
    return parse_type((CORPUS / "auth.st").read_text())


@pytest.fixture(scope="session")
def s_auth_asserted():
    return parse_type((CORPUS / "auth_asserted.st").read_text())


@pytest.fixture(scope="session")
def p_auth():
    return parse_process((CORPUS / "auth_client.proc").read_text())


@pytest.fixture(scope="session")
def p_bad():
    return parse_process((CORPUS / "bad_client.proc").read_text())


@pytest.fixture(scope="session")
def m_auth(s_auth):
    return synthesize(s_auth)
