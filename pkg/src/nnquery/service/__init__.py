from .app import create_app
from .sessions import Session, SessionStore, pca_projection

__all__ = ["create_app", "Session", "SessionStore", "pca_projection"]
