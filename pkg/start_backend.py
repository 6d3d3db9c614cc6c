"""
Startup script for the FastAPI service
"""
import subprocess
import sys

from bridge_trunc.config import settings

if __name__ == "__main__":
    print(f"Starting {settings.api_title} on http://{settings.host}:{settings.port}")
    print(f"API Documentation: http://{settings.host}:{settings.port}/docs")
    print("Press Ctrl+C to stop the server")
    print("-" * 50)

    try:
        subprocess.run([
            sys.executable, "-m", "uvicorn",
            "bridge_trunc.main:app",
            "--host", settings.host,
            "--port", str(settings.port),
        ] + (["--reload"] if settings.debug else []))
    except KeyboardInterrupt:
        print("\nServer stopped")
    except Exception as e:
        print(f"Error starting server: {e}")
        print("Make sure uvicorn is installed: pip install uvicorn[standard]")
