#!/usr/bin/env python3
"""
Run the FDE service locally with auto-reload
"""

import uvicorn

from fde.config import get_settings

if __name__ == "__main__":
    settings = get_settings()
    print(f"Starting FDE API on http://localhost:{settings.port}")
    print(f"Truncation: {settings.truncation}, threads: {settings.threads}")
    uvicorn.run("main:app", host="0.0.0.0", port=settings.port, reload=True)
