from caseforge.acquisition.session import DeviceSession, FastbootConnection

__all__ = ["DeviceSession", "FastbootConnection"]
