# caseforge/models/accounts.py
"""
ORM models mirroring the AccountManager database (system/users/0/accounts.db).

Column names are kept as found on devices, including the link-column
inconsistency: authtokens.accounts_id but extras.account_id.
"""

from sqlalchemy import Column, ForeignKey, Integer, String, Text, UniqueConstraint
from sqlalchemy.orm import relationship

from caseforge.db.session import Base


class Account(Base):
    __tablename__ = "accounts"

    id = Column("_id", Integer, primary_key=True, autoincrement=True)
    name = Column(String, nullable=False)
    type = Column(String, nullable=False)   # package-style, e.g. "com.example.appname"
    password = Column(String, nullable=True)  # may also hold a token, or be blank

    authtokens = relationship("AuthToken", back_populates="account", cascade="all, delete-orphan")
    extras = relationship("Extra", back_populates="account", cascade="all, delete-orphan")

    __table_args__ = (
        UniqueConstraint("name", "type"),
        {"sqlite_autoincrement": True},
    )

    def __repr__(self) -> str:
        return f"<Account id={self.id} name='{self.name}' type='{self.type}'>"


class AuthToken(Base):
    __tablename__ = "authtokens"

    id = Column("_id", Integer, primary_key=True, autoincrement=True)
    accounts_id = Column(Integer, ForeignKey("accounts._id"), nullable=False)
    type = Column(String, nullable=False)
    authtoken = Column(Text, nullable=True)

    account = relationship("Account", back_populates="authtokens")

    __table_args__ = (
        UniqueConstraint("accounts_id", "type"),
        {"sqlite_autoincrement": True},
    )

    def __repr__(self) -> str:
        return f"<AuthToken id={self.id} accounts_id={self.accounts_id} type='{self.type}'>"


class Extra(Base):
    __tablename__ = "extras"

    id = Column("_id", Integer, primary_key=True, autoincrement=True)
    account_id = Column(Integer, ForeignKey("accounts._id"))
    key = Column(String, nullable=False)
    value = Column(Text, nullable=True)

    account = relationship("Account", back_populates="extras")

    __table_args__ = (
        UniqueConstraint("account_id", "key"),
        {"sqlite_autoincrement": True},
    )

    def __repr__(self) -> str:
        return f"<Extra id={self.id} account_id={self.account_id} key='{self.key}'>"
