# caseforge/repositories/accounts_repository.py
"""
Repository for the AccountManager tables (accounts / authtokens / extras).
"""

from typing import Optional

from sqlalchemy.orm import Session

from caseforge.models.accounts import Account, AuthToken, Extra
from caseforge.repositories.base_repository import BaseRepository


class AccountsRepository(BaseRepository[Account]):

    def __init__(self, db: Session):
        super().__init__(Account, db)

    def create_account(self, id: int, name: str, type: str, password: Optional[str]) -> Account:
        return self.create(id=id, name=name, type=type, password=password)

    def add_authtoken(self, accounts_id: int, type: str, authtoken: str) -> AuthToken:
        token = AuthToken(accounts_id=accounts_id, type=type, authtoken=authtoken)
        self.db.add(token)
        self.db.flush()
        return token

    def add_extra(self, account_id: int, key: str, value: Optional[str]) -> Extra:
        extra = Extra(account_id=account_id, key=key, value=value)
        self.db.add(extra)
        self.db.flush()
        return extra
